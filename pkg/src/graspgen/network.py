"""Lightweight fully convolutional encoder-decoder for pixel-wise grasp maps.

Layout: Conv-BN-Mish stem, three stride-2 Conv-BN-Mish encoder stages,
residual blocks plus a multi-scale max-pool (SPP) module at the bottleneck,
pixel-shuffle decoder stages with concatenated skip connections, a final
Conv-BN-ReLU block and four parallel 1x1 output heads (quality, sin 2phi,
cos 2phi, width).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import torch
import torch.nn as nn


@dataclass
class NetworkConfig:
    input_channels: int = 4
    stem_channels: int = 32
    channel_schedule: list[int] = field(default_factory=lambda: [64, 128, 128])
    num_residual_blocks: int = 3
    spp_kernels: list[int] = field(default_factory=lambda: [5, 9, 13])
    decoder_channels: list[int] = field(default_factory=lambda: [64, 32])
    head_channels: int = 32

    def __post_init__(self):
        if self.input_channels not in (1, 3, 4):
            raise ValueError("input_channels must be 1, 3 or 4")
        if any(k % 2 == 0 for k in self.spp_kernels):
            raise ValueError("spp_kernels must be odd")
        for c in [*self.channel_schedule, *self.decoder_channels,
                  self.head_channels]:
            if c % 4 != 0:
                raise ValueError(
                    f"channel width {c} not divisible by 4 (pixel shuffle)")

    @property
    def downsample_factor(self) -> int:
        return 2 ** len(self.channel_schedule)


@dataclass
class NetworkOutput:
    """Raw (pre-activation) output planes, each B x H x W."""

    quality: torch.Tensor
    angle_sin: torch.Tensor
    angle_cos: torch.Tensor
    width: torch.Tensor


class ConvBNMish(nn.Sequential):
    def __init__(self, c_in, c_out, kernel=3, stride=1):
        super().__init__(
            nn.Conv2d(c_in, c_out, kernel, stride=stride,
                      padding=kernel // 2, bias=False),
            nn.BatchNorm2d(c_out, momentum=0.1),
            nn.Mish(),
        )


class ConvBNReLU(nn.Sequential):
    def __init__(self, c_in, c_out, kernel=3):
        super().__init__(
            nn.Conv2d(c_in, c_out, kernel, padding=kernel // 2, bias=False),
            nn.BatchNorm2d(c_out, momentum=0.1),
            nn.ReLU(),
        )


class ResidualBlock(nn.Module):
    """Two Conv-BN-Mish layers with an identity shortcut."""

    def __init__(self, channels):
        super().__init__()
        self.body = nn.Sequential(
            ConvBNMish(channels, channels),
            ConvBNMish(channels, channels),
        )

    def forward(self, x):
        return x + self.body(x)


class SPP(nn.Module):
    """Multi-scale max pooling: identity plus same-padded max pools at each
    kernel size, concatenated and fused back by a 1x1 Conv-BN-Mish."""

    def __init__(self, channels, kernels=(5, 9, 13)):
        super().__init__()
        self.pools = nn.ModuleList(
            nn.MaxPool2d(k, stride=1, padding=k // 2) for k in kernels)
        self.fuse = ConvBNMish(channels * (len(kernels) + 1), channels, kernel=1)

    def forward(self, x):
        return self.fuse(torch.cat([x] + [p(x) for p in self.pools], dim=1))


class DecoderStage(nn.Module):
    """Pixel-shuffle x2 upsample, skip concatenation, Conv-BN-Mish."""

    def __init__(self, c_in, c_skip, c_out, final_relu=False):
        super().__init__()
        self.shuffle = nn.PixelShuffle(2)
        conv = ConvBNReLU if final_relu else ConvBNMish
        self.conv = conv(c_in // 4 + c_skip, c_out)

    def forward(self, x, skip):
        return self.conv(torch.cat([self.shuffle(x), skip], dim=1))


class GraspNetwork(nn.Module):
    """Encoder-decoder grasp map predictor; outputs are raw regressions."""

    def __init__(self, cfg: NetworkConfig | None = None):
        super().__init__()
        self.cfg = cfg = cfg or NetworkConfig()

        self.stem = ConvBNMish(cfg.input_channels, cfg.stem_channels)
        chans = [cfg.stem_channels, *cfg.channel_schedule]
        self.encoder = nn.ModuleList(
            ConvBNMish(chans[i], chans[i + 1], stride=2)
            for i in range(len(cfg.channel_schedule)))
        bottleneck = cfg.channel_schedule[-1]
        self.residual = nn.Sequential(
            *(ResidualBlock(bottleneck) for _ in range(cfg.num_residual_blocks)))
        self.spp = SPP(bottleneck, cfg.spp_kernels)

        # skips come from the encoder outputs (deepest first), then the stem
        skip_chans = list(reversed(chans[:-1]))
        dec_in = [bottleneck, *cfg.decoder_channels]
        dec_out = [*cfg.decoder_channels, cfg.head_channels]
        self.decoder = nn.ModuleList(
            DecoderStage(dec_in[i], skip_chans[i], dec_out[i],
                         final_relu=(i == len(dec_in) - 1))
            for i in range(len(dec_in)))

        self.heads = nn.ModuleList(
            nn.Conv2d(cfg.head_channels, 1, 1) for _ in range(4))

        self._init_weights()

    def _init_weights(self):
        for m in self.modules():
            if isinstance(m, nn.Conv2d):
                nn.init.kaiming_normal_(m.weight, nonlinearity="relu")
                if m.bias is not None:
                    nn.init.zeros_(m.bias)
        for head in self.heads:
            nn.init.zeros_(head.bias)

    def forward(self, x: torch.Tensor) -> NetworkOutput:
        factor = self.cfg.downsample_factor
        h, w = x.shape[-2:]
        if h % factor or w % factor:
            raise ValueError(
                f"input H and W must be multiples of {factor}, got {h}x{w}")

        x = self.stem(x)
        skips = [x]
        for stage in self.encoder:
            x = stage(x)
            skips.append(x)
        x = self.spp(self.residual(x))
        # skips[-1] is the bottleneck itself; decode against the rest
        for stage, skip in zip(self.decoder, reversed(skips[:-1])):
            x = stage(x, skip)
        q, s, c, wdt = (head(x).squeeze(1) for head in self.heads)
        return NetworkOutput(q, s, c, wdt)


def build_network(cfg: NetworkConfig | None = None) -> GraspNetwork:
    return GraspNetwork(cfg)


def count_parameters(net: nn.Module) -> int:
    """Exact count of trainable scalar weights."""
    return sum(p.numel() for p in net.parameters() if p.requires_grad)


def save_checkpoint(net: GraspNetwork, path) -> None:
    torch.save({"config": asdict(net.cfg),
                "state_dict": net.state_dict()}, path)


def load_checkpoint(path) -> GraspNetwork:
    blob = torch.load(path, map_location="cpu", weights_only=False)
    cfg = NetworkConfig(**blob["config"])
    net = GraspNetwork(cfg)
    state = blob["state_dict"]
    own = net.state_dict()
    if set(own) != set(state) or any(own[k].shape != state[k].shape
                                     for k in own):
        raise ValueError(f"checkpoint {path} does not match its stored config")
    net.load_state_dict(state)
    return net
