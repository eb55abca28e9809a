import math

import numpy as np
import pytest
from PIL import Image

from graspgen.geometry import GraspRectangle
from graspgen.datasets.samples import GraspSample


def make_block_sample(sample_id="s0", h=480, w=640, center=(320, 240),
                      angle=0.0, block=(60, 24), depth_base=0.6,
                      object_id=""):
    """Synthetic scene: one rectangular block on a flat background.

    The grasp rectangle closes across the block's short side.
    """
    cu, cv = center
    long_e, short_e = block
    rgb = np.full((h, w, 3), 90, dtype=np.uint8)
    depth = np.full((h, w), depth_base, dtype=np.float32)

    # paint the block (rotated rectangle) into rgb and depth
    body = GraspRectangle(cu, cv, angle, long_e, short_e)
    mask = body.mask(h, w)
    rgb[mask] = (200, 160, 40)
    depth[mask] = depth_base - 0.03

    grasp = GraspRectangle(cu, cv, angle + math.pi / 2.0, short_e * 1.5, long_e)
    return GraspSample(id=sample_id, rgb=rgb, depth=depth,
                       rectangles=[grasp], object_id=object_id or sample_id)


def write_cornell_sample(root, index, sample: GraspSample):
    stem = f"pcd{index:04d}"
    Image.fromarray(sample.rgb).save(root / f"{stem}r.png")
    Image.fromarray(sample.depth, mode="F").save(root / f"{stem}d.tiff")
    lines = []
    for r in sample.rectangles:
        for u, v in r.corners():
            lines.append(f"{u:.4f} {v:.4f}")
    (root / f"{stem}cpos.txt").write_text("\n".join(lines) + "\n")
    return stem


@pytest.fixture(scope="session")
def cornell_root(tmp_path_factory):
    """Eight Cornell-layout samples with blocks at varied poses."""
    root = tmp_path_factory.mktemp("cornell")
    rng = np.random.default_rng(7)
    index_lines = []
    for i in range(8):
        cu = 320 + int(rng.integers(-40, 40))
        cv = 240 + int(rng.integers(-40, 40))
        angle = float(rng.uniform(-math.pi / 2, math.pi / 2))
        sample = make_block_sample(h=480, w=640, center=(cu, cv), angle=angle,
                                   block=(44, 24))
        stem = write_cornell_sample(root, 100 + i, sample)
        index_lines.append(f"{stem} obj{i % 4}")
    (root / "z.txt").write_text("\n".join(index_lines) + "\n")
    return root


@pytest.fixture(scope="session")
def jacquard_root(tmp_path_factory):
    """Eight Jacquard-layout scenes."""
    root = tmp_path_factory.mktemp("jacquard")
    rng = np.random.default_rng(11)
    for i in range(8):
        scene = root / f"scene_{i:03d}"
        scene.mkdir()
        stem = f"0_scene_{i:03d}"
        cu = 240 + int(rng.integers(-30, 30))
        cv = 240 + int(rng.integers(-30, 30))
        angle = float(rng.uniform(-math.pi / 2, math.pi / 2))
        sample = make_block_sample(h=480, w=480, center=(cu, cv), angle=angle,
                                   block=(44, 24))
        Image.fromarray(sample.rgb).save(scene / f"{stem}_RGB.png")
        Image.fromarray(sample.depth, mode="F").save(
            scene / f"{stem}_perfect_depth.tiff")
        lines = []
        for r in sample.rectangles:
            lines.append(f"{r.center_u:.2f};{r.center_v:.2f};"
                         f"{math.degrees(r.angle):.2f};{r.width:.2f};"
                         f"{r.height:.2f}")
        (scene / f"{stem}_grasps.txt").write_text("\n".join(lines) + "\n")
    return root
