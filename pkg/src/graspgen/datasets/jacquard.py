"""Jacquard grasp dataset loader.

Per-scene layout under the root directory:
    <scene>/<id>_RGB.png
    <scene>/<id>_perfect_depth.tiff
    <scene>/<id>_grasps.txt     lines "u;v;theta_degrees;opening_px;jaw_px"
"""

from __future__ import annotations

import logging
import math
from pathlib import Path

import numpy as np
from PIL import Image

from ..geometry import GraspRectangle, wrap_angle
from .samples import GraspSample, center_crop

log = logging.getLogger(__name__)


def _parse_grasp_lines(path: Path) -> list[GraspRectangle]:
    rects = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        try:
            u, v, theta_deg, opening, jaw = (float(x) for x in line.split(";"))
            rects.append(GraspRectangle(
                u, v, wrap_angle(math.radians(theta_deg)), opening, jaw))
        except ValueError as e:
            log.debug("%s: skipping grasp line %r (%s)", path.name, line, e)
    return rects


def load_jacquard(root_dir, crop_size: int = 300) -> list[GraspSample]:
    """Load every Jacquard scene under root_dir, center-cropped to crop_size."""
    root = Path(root_dir)
    samples = []
    for grasps in sorted(root.glob("**/*_grasps.txt")):
        stem = grasps.name[:-len("_grasps.txt")]
        scene = grasps.parent
        rects = _parse_grasp_lines(grasps)
        if not rects:
            log.warning("%s: empty grasps file, sample skipped", stem)
            continue

        rgb_path = scene / f"{stem}_RGB.png"
        depth_path = scene / f"{stem}_perfect_depth.tiff"
        if not rgb_path.exists():
            log.warning("%s: missing RGB image, sample skipped", stem)
            continue
        try:
            depth = np.asarray(Image.open(depth_path), dtype=np.float32)
        except (OSError, FileNotFoundError) as e:
            log.warning("%s: unreadable depth (%s), sample skipped", stem, e)
            continue
        rgb = np.asarray(Image.open(rgb_path).convert("RGB"))

        sample = GraspSample(
            id=f"{scene.name}/{stem}", rgb=rgb, depth=depth,
            rectangles=rects, object_id=scene.name)
        sample = center_crop(sample, crop_size)
        if not sample.rectangles:
            log.warning("%s: all rectangles outside the crop, sample skipped",
                        stem)
            continue
        samples.append(sample)
    return samples
