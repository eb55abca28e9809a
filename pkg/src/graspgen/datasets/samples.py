"""Dataset sample container, pixel-target rasterization, augmentation,
input normalization and train/val splitting."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import cv2
import numpy as np
from scipy import ndimage

from ..geometry import GraspRectangle, _rect_mask
from ..maps import DEFAULT_WIDTH_SCALE, GraspMaps

log = logging.getLogger(__name__)

# Same planes as GraspMaps; ground-truth targets reuse the container.
GroundTruthMaps = GraspMaps

# Fraction of the closing axis painted as positive in the quality target.
QUALITY_BAND_FRACTION = 1.0 / 3.0


@dataclass
class GraspSample:
    """One dataset image with its positive grasp rectangles."""

    id: str
    rgb: np.ndarray            # H x W x 3, uint8
    depth: np.ndarray          # H x W, meters, 0 = invalid
    rectangles: list[GraspRectangle]
    object_id: str = ""

    def __post_init__(self):
        if self.rgb.shape[:2] != self.depth.shape:
            raise ValueError("rgb and depth must share H x W")

    @property
    def shape(self) -> tuple[int, int]:
        return self.depth.shape


def rasterize_labels(rects: list[GraspRectangle], h: int, w: int,
                     width_scale: float = DEFAULT_WIDTH_SCALE) -> GroundTruthMaps:
    """Paint per-pixel training targets from rectangle annotations.

    For each rectangle the central third of its closing-axis extent gets
    quality 1.0, (sin 2phi, cos 2phi) and the normalized width; later
    rectangles overwrite earlier ones where they overlap.
    """
    if width_scale <= 0:
        raise ValueError("width_scale must be > 0")
    quality = np.zeros((h, w), dtype=np.float32)
    angle_sin = np.zeros((h, w), dtype=np.float32)
    angle_cos = np.zeros((h, w), dtype=np.float32)
    width = np.zeros((h, w), dtype=np.float32)
    for r in rects:
        band = _rect_mask(r, h, w, width_fraction=QUALITY_BAND_FRACTION)
        quality[band] = 1.0
        angle_sin[band] = math.sin(2.0 * r.angle)
        angle_cos[band] = math.cos(2.0 * r.angle)
        width[band] = min(r.width / width_scale, 1.0)
    return GroundTruthMaps(quality, angle_sin, angle_cos, width, width_scale)


def _affine_crop(sample: GraspSample, origin_u: float, origin_v: float,
                 scale: float, out_h: int, out_w: int) -> GraspSample:
    """Crop at (origin_u, origin_v) and rescale by `scale` (dst px per src px),
    applying the identical map to images and rectangles."""
    m = np.array([[scale, 0.0, -scale * origin_u],
                  [0.0, scale, -scale * origin_v]])
    rgb = cv2.warpAffine(sample.rgb, m, (out_w, out_h),
                         flags=cv2.INTER_LINEAR)
    depth = cv2.warpAffine(sample.depth, m, (out_w, out_h),
                           flags=cv2.INTER_NEAREST)
    rects = []
    for r in sample.rectangles:
        cu = scale * (r.center_u - origin_u)
        cv_ = scale * (r.center_v - origin_v)
        if 0 <= cu < out_w and 0 <= cv_ < out_h:
            rects.append(GraspRectangle(cu, cv_, r.angle,
                                        r.width * scale, r.height * scale))
    return replace(sample, rgb=rgb, depth=depth, rectangles=rects)


def center_crop(sample: GraspSample, crop_size: int) -> GraspSample:
    """Center-crop to crop_size x crop_size, translating the rectangles."""
    h, w = sample.shape
    ou = (w - crop_size) // 2
    ov = (h - crop_size) // 2
    return _affine_crop(sample, ou, ov, 1.0, crop_size, crop_size)


def augment(sample: GraspSample, rng_seed: int,
            max_jitter: float = 50.0,
            zoom_range: tuple[float, float] = (0.5, 1.0)) -> GraspSample:
    """Random translation-jittered crop and zoom, deterministic per seed.

    If every rectangle lands outside the crop the draw is retried with a
    sub-seed (up to 10 times) before giving up and returning the input.
    """
    h, w = sample.shape
    for attempt in range(10):
        rng = np.random.default_rng([int(rng_seed), attempt])
        zoom = rng.uniform(*zoom_range)
        ju = rng.uniform(-max_jitter, max_jitter)
        jv = rng.uniform(-max_jitter, max_jitter)
        # source window of size (zoom * H, zoom * W) centred with jitter
        win_w, win_h = zoom * w, zoom * h
        ou = (w - win_w) / 2.0 + ju
        ov = (h - win_h) / 2.0 + jv
        out = _affine_crop(sample, ou, ov, 1.0 / zoom, h, w)
        if out.rectangles:
            return out
    log.warning("augment: no rectangle survived after 10 draws for %s",
                sample.id)
    return sample


def normalize_inputs(sample: GraspSample, modality: str) -> np.ndarray:
    """Produce the C x H x W network input for modality d / rgb / rgbd.

    Invalid depth pixels (0) are filled from their nearest valid neighbor,
    then the depth plane is mean-centred and clamped to [-1, 1]; RGB maps
    to [-0.5, 0.5].
    """
    modality = modality.lower().replace("-", "")
    if modality not in ("d", "rgb", "rgbd"):
        raise ValueError(f"unknown modality {modality!r}")
    planes = []
    if "d" in modality:
        depth = sample.depth.astype(np.float32)
        invalid = depth <= 0
        if invalid.all():
            raise ValueError(f"sample {sample.id}: depth plane entirely invalid")
        if invalid.any():
            idx = ndimage.distance_transform_edt(
                invalid, return_distances=False, return_indices=True)
            depth = depth[tuple(idx)]
        depth = np.clip(depth - depth.mean(), -1.0, 1.0)
        planes.append(depth)
    if "rgb" in modality:
        rgb = sample.rgb.astype(np.float32) / 255.0 - 0.5
        planes.extend(np.moveaxis(rgb, -1, 0))
    return np.stack(planes).astype(np.float32)


def modality_channels(modality: str) -> int:
    return {"d": 1, "rgb": 3, "rgbd": 4}[modality.lower().replace("-", "")]


def split(samples: list[GraspSample], mode: str, train_fraction: float,
          seed: int) -> tuple[list[GraspSample], list[GraspSample]]:
    """Deterministic train/val partition, image-wise or object-wise."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    n_train = int(math.floor(train_fraction * len(samples)))

    if mode == "image-wise":
        order = rng.permutation(len(samples))
        train = [samples[i] for i in order[:n_train]]
        val = [samples[i] for i in order[n_train:]]
        return train, val

    if mode == "object-wise":
        if any(not s.object_id for s in samples):
            raise ValueError("object-wise split requires object_id on every sample")
        by_object: dict[str, list[GraspSample]] = {}
        for s in samples:
            by_object.setdefault(s.object_id, []).append(s)
        ids = sorted(by_object)
        rng.shuffle(ids)
        train: list[GraspSample] = []
        val: list[GraspSample] = []
        for oid in ids:
            bucket = train if len(train) < n_train else val
            bucket.extend(by_object[oid])
        return train, val

    raise ValueError(f"unknown split mode {mode!r}")
