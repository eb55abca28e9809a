"""Composite Smooth-L1 objective and the Adam training loop."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .datasets.samples import (GraspSample, GroundTruthMaps, augment,
                               modality_channels, normalize_inputs,
                               rasterize_labels)
from .maps import DEFAULT_WIDTH_SCALE
from .network import (GraspNetwork, NetworkConfig, NetworkOutput,
                      build_network, save_checkpoint)

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    dataset: str = "cornell"           # cornell | jacquard
    modality: str = "rgbd"             # d | rgb | rgbd
    input_size: int = 224
    batch_size: int = 8
    epochs: int = 100
    learning_rate: float = 1e-3
    beta: float = 1.0                  # Smooth-L1 quadratic/linear threshold
    seed: int = 0
    split_mode: str = "image-wise"     # image-wise | object-wise
    train_fraction: float = 0.9
    width_scale: float = DEFAULT_WIDTH_SCALE
    augment: bool = True

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.beta <= 0:
            raise ValueError("beta must be > 0")


@dataclass
class LossBreakdown:
    total: float
    quality_term: float
    angle_sin_term: float
    angle_cos_term: float
    width_term: float


def smooth_l1(x: torch.Tensor, y: torch.Tensor, beta: float = 1.0) -> torch.Tensor:
    """Mean-reduced Smooth-L1: 0.5 d^2 / beta below the threshold, |d| - beta/2
    above it."""
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {tuple(x.shape)} vs {tuple(y.shape)}")
    if beta <= 0:
        raise ValueError("beta must be > 0")
    return F.smooth_l1_loss(x, y, beta=beta, reduction="mean")


def total_loss(pred: NetworkOutput, gt_quality: torch.Tensor,
               gt_sin: torch.Tensor, gt_cos: torch.Tensor,
               gt_width: torch.Tensor, beta: float = 1.0
               ) -> tuple[torch.Tensor, LossBreakdown]:
    """Sum of the per-plane Smooth-L1 losses.

    The angle term is realized over the (sin 2phi, cos 2phi) planes, so it
    contributes two summands.
    """
    lq = smooth_l1(pred.quality, gt_quality, beta)
    ls = smooth_l1(pred.angle_sin, gt_sin, beta)
    lc = smooth_l1(pred.angle_cos, gt_cos, beta)
    lw = smooth_l1(pred.width, gt_width, beta)
    total = lq + ls + lc + lw
    parts = tuple(float(t.detach()) for t in (lq, ls, lc, lw))
    return total, LossBreakdown(sum(parts), *parts)


def _maps_to_tensors(maps: GroundTruthMaps):
    return tuple(torch.from_numpy(np.ascontiguousarray(p))
                 for p in (maps.quality, maps.angle_sin, maps.angle_cos,
                           maps.width))


def prepare_batch(samples: list[GraspSample], modality: str,
                  width_scale: float):
    """Stack network inputs and ground-truth planes for a batch."""
    xs, qs, ss, cs, ws = [], [], [], [], []
    for s in samples:
        xs.append(torch.from_numpy(normalize_inputs(s, modality)))
        h, w = s.shape
        q, sn, co, wd = _maps_to_tensors(
            rasterize_labels(s.rectangles, h, w, width_scale))
        qs.append(q)
        ss.append(sn)
        cs.append(co)
        ws.append(wd)
    return (torch.stack(xs), torch.stack(qs), torch.stack(ss),
            torch.stack(cs), torch.stack(ws))


def train_step(net: GraspNetwork, optimizer, batch, beta: float):
    x, q, s, c, w = batch
    optimizer.zero_grad()
    pred = net(x)
    loss, breakdown = total_loss(pred, q, s, c, w, beta)
    if not torch.isfinite(loss):
        raise RuntimeError("non-finite training loss")
    loss.backward()
    optimizer.step()
    return breakdown


def train(cfg: TrainConfig, train_samples: list[GraspSample],
          val_samples: list[GraspSample], out_dir,
          net: GraspNetwork | None = None) -> Path:
    """Run the full training loop; returns the path of the best checkpoint.

    Per epoch: seeded shuffle, optional augmentation, Adam updates, then
    rectangle-metric validation; the best-accuracy checkpoint is retained.
    """
    from .evaluation import benchmark_samples   # cycle: evaluation uses the net

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(cfg.seed)
    if net is None:
        net = build_network(NetworkConfig(
            input_channels=modality_channels(cfg.modality)))
    optimizer = torch.optim.Adam(net.parameters(), lr=cfg.learning_rate)

    log_path = out / "metrics.csv"
    with log_path.open("w", newline="") as f:
        csv.writer(f).writerow(
            ["epoch", "loss_total", "loss_q", "loss_sin", "loss_cos",
             "loss_w", "val_accuracy", "seconds"])

    best_acc = -1.0
    best_path = out / "best.ckpt"
    rng = np.random.default_rng(cfg.seed)
    for epoch in range(cfg.epochs):
        t0 = time.monotonic()
        net.train()
        order = rng.permutation(len(train_samples))
        sums = np.zeros(5)
        n_batches = 0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            batch_samples = []
            for i in idx:
                s = train_samples[i]
                if cfg.augment:
                    s = augment(s, int(rng.integers(0, 2 ** 31)))
                batch_samples.append(s)
            batch = prepare_batch(batch_samples, cfg.modality, cfg.width_scale)
            try:
                b = train_step(net, optimizer, batch, cfg.beta)
            except RuntimeError as e:
                raise RuntimeError(
                    f"epoch {epoch}, batch starting at sample "
                    f"{train_samples[idx[0]].id}: {e}") from e
            sums += [b.total, b.quality_term, b.angle_sin_term,
                     b.angle_cos_term, b.width_term]
            n_batches += 1

        net.eval()
        report = benchmark_samples(net, val_samples, cfg.modality,
                                   width_scale=cfg.width_scale)
        acc = report.accuracy
        seconds = time.monotonic() - t0
        means = sums / max(n_batches, 1)
        with log_path.open("a", newline="") as f:
            csv.writer(f).writerow(
                [epoch, *(f"{m:.6f}" for m in means), f"{acc:.4f}",
                 f"{seconds:.2f}"])
        log.info("epoch %d: loss %.4f val acc %.3f (%.1fs)",
                 epoch, means[0], acc, seconds)

        save_checkpoint(net, out / f"epoch_{epoch}.ckpt")
        if acc > best_acc:
            best_acc = acc
            save_checkpoint(net, best_path)
    return best_path


def gradient_check(loss_fn, params: list[torch.Tensor], epsilon: float = 1e-4,
                   max_checks_per_param: int = 20, seed: int = 0):
    """Compare analytic gradients to central finite differences.

    loss_fn() must rebuild the graph from `params` on every call and return
    a scalar loss. Residuals sitting exactly on the Smooth-L1 kink are the
    caller's responsibility to avoid (the loss is nondifferentiable there).
    Returns (max_rel_error, n_checked, dead_params) where dead_params lists
    parameters that received an all-zero gradient.
    """
    rng = np.random.default_rng(seed)
    max_rel = 0.0
    n_checked = 0
    dead = []

    loss = loss_fn()
    grads = torch.autograd.grad(loss, params)
    for p, g in zip(params, grads):
        if float(g.abs().max()) == 0.0:
            dead.append(p)
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        k = min(max_checks_per_param, flat.numel())
        for j in rng.choice(flat.numel(), size=k, replace=False):
            orig = float(flat.detach()[j])
            with torch.no_grad():
                flat[j] = orig + epsilon
            lp = float(loss_fn().detach())
            with torch.no_grad():
                flat[j] = orig - epsilon
            lm = float(loss_fn().detach())
            with torch.no_grad():
                flat[j] = orig
            numeric = (lp - lm) / (2 * epsilon)
            analytic = float(gflat[j])
            denom = max(abs(numeric), abs(analytic), 1e-8)
            rel = abs(numeric - analytic) / denom
            if abs(numeric) < 1e-12 and abs(analytic) < 1e-12:
                rel = 0.0
            max_rel = max(max_rel, rel)
            n_checked += 1
    return max_rel, n_checked, dead
