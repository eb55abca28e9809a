"""Decode raw network outputs into grasps, peak extraction, the rectangle
metric, dataset benchmarking and heatmap rendering."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass

import cv2
import numpy as np
import torch
from scipy import ndimage

from .datasets.samples import GraspSample, normalize_inputs
from .geometry import (GraspImage, GraspRectangle, angle_offset, rect_from_grasp,
                       rect_iou)
from .maps import DEFAULT_WIDTH_SCALE, GraspMaps
from .network import GraspNetwork, NetworkOutput

# Jaw size assumed for predicted rectangles when scoring the metric.
PRED_HEIGHT_RATIO = 0.5

IOU_THRESHOLD = 0.25
ANGLE_THRESHOLD = math.radians(30.0)


@dataclass
class EvaluationReport:
    dataset: str
    modality: str
    input_size: int
    n_samples: int
    n_correct: int
    accuracy: float
    mean_inference_ms: float
    mean_forward_ms: float = 0.0


def decode_maps(raw: NetworkOutput, width_scale: float = DEFAULT_WIDTH_SCALE,
                smooth_sigma: float = 2.0) -> GraspMaps:
    """Turn raw output planes into grasp maps.

    Quality is sigmoid-clamped into [0, 1] and optionally Gaussian-smoothed;
    angle planes pass through (the decode is atan2-based); width is clamped
    to [0, 1] of width_scale.
    """
    def plane(t: torch.Tensor) -> np.ndarray:
        a = t.detach().cpu().numpy()
        return a[0] if a.ndim == 3 else a

    quality = 1.0 / (1.0 + np.exp(-plane(raw.quality)))
    if smooth_sigma > 0:
        quality = ndimage.gaussian_filter(quality, smooth_sigma)
    return GraspMaps(
        quality=quality.astype(np.float32),
        angle_sin=plane(raw.angle_sin).astype(np.float32),
        angle_cos=plane(raw.angle_cos).astype(np.float32),
        width=np.clip(plane(raw.width), 0.0, 1.0).astype(np.float32),
        width_scale=width_scale,
    )


def extract_grasps(maps: GraspMaps, k: int = 5,
                   min_distance: int = 10) -> list[GraspImage]:
    """Up to k local maxima of the quality plane, quality-descending.

    Each returned peak is the maximum of its (2*min_distance+1)^2
    neighborhood; returned peaks are pairwise >= min_distance apart in
    Chebyshev distance. Ties break by (row, column) order. A flat-zero
    plane yields an empty list.
    """
    if k < 1 or min_distance < 1:
        raise ValueError("k and min_distance must be >= 1")
    q = maps.quality
    footprint = 2 * min_distance + 1
    local_max = (q == ndimage.maximum_filter(q, size=footprint)) & (q > 0)
    vs, us = np.nonzero(local_max)
    if len(vs) == 0:
        return []
    order = np.lexsort((us, vs, -q[vs, us]))

    angle = maps.angle()
    width = maps.width_px()
    picked: list[GraspImage] = []
    for i in order:
        v, u = int(vs[i]), int(us[i])
        if any(max(abs(g.u - u), abs(g.v - v)) < min_distance for g in picked):
            continue
        picked.append(GraspImage(u, v, float(angle[v, u]),
                                 float(width[v, u]), float(q[v, u])))
        if len(picked) == k:
            break
    return picked


def evaluate_rectangle_metric(pred: GraspImage,
                              gt_rects: list[GraspRectangle],
                              canvas: tuple[int, int],
                              iou_threshold: float = IOU_THRESHOLD,
                              angle_threshold: float = ANGLE_THRESHOLD) -> bool:
    """Rectangle metric: IoU > 25% with some ground-truth rectangle whose
    angle offset is below 30 degrees."""
    if not gt_rects:
        return False
    pred_rect = rect_from_grasp(pred, max(pred.width * PRED_HEIGHT_RATIO, 1.0))
    for gt in gt_rects:
        if angle_offset(pred.angle, gt.angle) < angle_threshold and \
                rect_iou(pred_rect, gt, canvas) > iou_threshold:
            return True
    return False


def best_metric_scores(pred: GraspImage, gt_rects: list[GraspRectangle],
                       canvas: tuple[int, int]) -> tuple[float, float]:
    """Best (iou, angle_offset_deg) over the ground-truth set, for reports."""
    pred_rect = rect_from_grasp(pred, max(pred.width * PRED_HEIGHT_RATIO, 1.0))
    best_iou, best_ang = 0.0, 180.0
    for gt in gt_rects:
        iou = rect_iou(pred_rect, gt, canvas)
        ang = math.degrees(angle_offset(pred.angle, gt.angle))
        if iou > best_iou:
            best_iou, best_ang = iou, ang
    return best_iou, best_ang


def predict_sample(net: GraspNetwork, sample: GraspSample, modality: str,
                   width_scale: float = DEFAULT_WIDTH_SCALE,
                   smooth_sigma: float = 2.0):
    """Forward one sample; returns (maps, forward_ms, total_ms)."""
    x = torch.from_numpy(normalize_inputs(sample, modality)).unsqueeze(0)
    t0 = time.perf_counter()
    with torch.no_grad():
        net.eval()
        raw = net(x)
    t1 = time.perf_counter()
    maps = decode_maps(raw, width_scale, smooth_sigma)
    t2 = time.perf_counter()
    return maps, (t1 - t0) * 1e3, (t2 - t0) * 1e3


def benchmark_samples(net: GraspNetwork, samples: list[GraspSample],
                      modality: str, dataset: str = "",
                      width_scale: float = DEFAULT_WIDTH_SCALE,
                      smooth_sigma: float = 2.0, out_dir=None
                      ) -> EvaluationReport:
    """Score the top-1 grasp of every sample with the rectangle metric.

    Writes report.json and per_sample.csv when out_dir is given.
    """
    rows = []
    n_correct = 0
    forward_ms = []
    total_ms = []
    input_size = samples[0].shape[0] if samples else 0
    for s in samples:
        maps, f_ms, t_ms = predict_sample(net, s, modality, width_scale,
                                          smooth_sigma)
        t0 = time.perf_counter()
        grasps = extract_grasps(maps, k=1)
        if grasps:
            correct = evaluate_rectangle_metric(grasps[0], s.rectangles, s.shape)
            iou, ang = best_metric_scores(grasps[0], s.rectangles, s.shape)
        else:
            correct, iou, ang = False, 0.0, 180.0
        t_ms += (time.perf_counter() - t0) * 1e3
        n_correct += bool(correct)
        forward_ms.append(f_ms)
        total_ms.append(t_ms)
        rows.append([s.id, int(correct), f"{iou:.4f}", f"{ang:.2f}",
                     f"{t_ms:.2f}"])

    n = len(samples)
    report = EvaluationReport(
        dataset=dataset, modality=modality, input_size=input_size,
        n_samples=n, n_correct=n_correct,
        accuracy=(n_correct / n) if n else 0.0,
        mean_inference_ms=float(np.mean(total_ms)) if total_ms else 0.0,
        mean_forward_ms=float(np.mean(forward_ms)) if forward_ms else 0.0,
    )
    if out_dir is not None:
        from pathlib import Path
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(asdict(report), indent=2))
        with (out / "per_sample.csv").open("w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["id", "correct", "iou_best", "angle_offset_deg", "ms"])
            w.writerows(rows)
    return report


def render_heatmaps(maps: GraspMaps, grasps: list[GraspImage], out_dir,
                    rgb: np.ndarray | None = None) -> list:
    """Write color-mapped quality/angle/width PNGs and a rectangle overlay."""
    from pathlib import Path
    import matplotlib

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def save_plane(plane, name, vmin, vmax, cmap):
        norm = matplotlib.colors.Normalize(vmin=vmin, vmax=vmax)
        img = (matplotlib.colormaps[cmap](norm(plane))[..., :3] * 255).astype(np.uint8)
        lo, hi = float(plane.min()), float(plane.max())
        path = out / f"{name}_min{lo:.3f}_max{hi:.3f}.png"
        cv2.imwrite(str(path), cv2.cvtColor(img, cv2.COLOR_RGB2BGR))
        written.append(path)

    save_plane(maps.quality, "quality", 0.0, 1.0, "jet")
    save_plane(maps.angle(), "angle", -np.pi / 2, np.pi / 2, "hsv")
    save_plane(maps.width_px(), "width", 0.0, maps.width_scale, "viridis")

    h, w = maps.shape
    if rgb is None:
        base = (np.stack([maps.quality] * 3, axis=-1) * 255).astype(np.uint8)
    else:
        base = rgb.copy()
    for g in grasps:
        rect = rect_from_grasp(g, max(g.width * PRED_HEIGHT_RATIO, 1.0))
        pts = rect.corners().astype(np.int32).reshape(-1, 1, 2)
        cv2.polylines(base, [pts], isClosed=True, color=(0, 0, 255), thickness=1)
    overlay = out / "overlay.png"
    cv2.imwrite(str(overlay), cv2.cvtColor(base, cv2.COLOR_RGB2BGR))
    written.append(overlay)
    return written
