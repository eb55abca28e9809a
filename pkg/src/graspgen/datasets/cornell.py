"""Cornell grasping dataset loader.

Expected layout under the root directory (flat or nested one level):
    pcd####r.png       RGB image
    pcd####d.tiff      depth in meters (optional)
    pcd####.txt        ascii point cloud, used when the tiff is absent
    pcd####cpos.txt    positive rectangles, 4 corner lines "u v" each
    z.txt              optional image-to-object index, lines "<image> <object>"
"""

from __future__ import annotations

import logging
import re
from pathlib import Path

import numpy as np
from PIL import Image

from ..geometry import AnnotationError, grasp_from_rect
from .samples import GraspSample, center_crop

log = logging.getLogger(__name__)

CORNELL_SHAPE = (480, 640)


def _parse_rectangles(path: Path):
    lines = path.read_text().split("\n")
    lines = [ln for ln in lines if ln.strip()]
    rects = []
    for i in range(0, len(lines) - 3, 4):
        try:
            corners = [[float(x) for x in lines[i + j].split()[:2]]
                       for j in range(4)]
            rects.append(grasp_from_rect(corners))
        except (AnnotationError, ValueError, IndexError) as e:
            log.debug("%s: skipping rectangle at line %d (%s)", path.name, i, e)
    return rects


def _depth_from_pointcloud(path: Path, shape=CORNELL_SHAPE) -> np.ndarray:
    """Rebuild the depth plane from a pcd####.txt ascii point cloud using the
    stored per-point image index (index = row * 640 + col)."""
    depth = np.zeros(shape, dtype=np.float32)
    with path.open() as f:
        in_data = False
        for line in f:
            if in_data:
                parts = line.split()
                if len(parts) < 5:
                    continue
                z = float(parts[2])
                idx = int(float(parts[4]))
                r, c = divmod(idx, shape[1])
                if 0 <= r < shape[0]:
                    depth[r, c] = z
            elif line.startswith("DATA"):
                in_data = True
    return depth


def _load_object_index(root: Path) -> dict[str, str]:
    index = {}
    z = root / "z.txt"
    if z.exists():
        for line in z.read_text().splitlines():
            parts = line.split()
            if len(parts) >= 2:
                m = re.search(r"(\d{4})", parts[0])
                if m:
                    index[f"pcd{m.group(1)}"] = parts[1]
    return index


def load_cornell(root_dir, crop_size: int = 224) -> list[GraspSample]:
    """Load every annotated Cornell image, center-cropped to crop_size."""
    root = Path(root_dir)
    object_index = _load_object_index(root)
    samples = []
    for ann in sorted(root.glob("**/pcd*cpos.txt")):
        stem = ann.name[:-len("cpos.txt")]     # pcd####
        rgb_path = ann.parent / f"{stem}r.png"
        if not rgb_path.exists():
            log.warning("%s: missing RGB image, sample skipped", stem)
            continue
        rgb = np.asarray(Image.open(rgb_path).convert("RGB"))

        tiff = ann.parent / f"{stem}d.tiff"
        pcd = ann.parent / f"{stem}.txt"
        if tiff.exists():
            depth = np.asarray(Image.open(tiff), dtype=np.float32)
        elif pcd.exists():
            depth = _depth_from_pointcloud(pcd, rgb.shape[:2])
        else:
            log.warning("%s: no depth source, sample skipped", stem)
            continue

        rects = _parse_rectangles(ann)
        if not rects:
            log.warning("%s: no valid rectangles, sample skipped", stem)
            continue

        sample = GraspSample(
            id=stem, rgb=rgb, depth=depth, rectangles=rects,
            object_id=object_index.get(stem, stem))
        sample = center_crop(sample, crop_size)
        if not sample.rectangles:
            log.warning("%s: all rectangles outside the crop, sample skipped",
                        stem)
            continue
        samples.append(sample)
    return samples
