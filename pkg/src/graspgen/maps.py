"""Per-pixel grasp map planes shared by dataset targets, network decode and
the simulator's oracle predictor."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Pixel width used to normalize the gripper-width plane into [0, 1].
DEFAULT_WIDTH_SCALE = 150.0


@dataclass
class GraspMaps:
    """Quality / double-angle / width planes, all H x W.

    The angle is stored as (sin 2*phi, cos 2*phi) so the antipodal wrap at
    +-pi/2 stays continuous; the width plane is normalized by width_scale px.
    """

    quality: np.ndarray
    angle_sin: np.ndarray
    angle_cos: np.ndarray
    width: np.ndarray
    width_scale: float = DEFAULT_WIDTH_SCALE

    def __post_init__(self):
        shapes = {p.shape for p in
                  (self.quality, self.angle_sin, self.angle_cos, self.width)}
        if len(shapes) != 1 or len(self.quality.shape) != 2:
            raise ValueError(f"all planes must share one HxW shape, got {shapes}")
        if self.width_scale <= 0:
            raise ValueError("width_scale must be > 0")

    @property
    def shape(self) -> tuple[int, int]:
        return self.quality.shape

    def angle(self) -> np.ndarray:
        """Decoded per-pixel grasp angle in [-pi/2, pi/2)."""
        a = 0.5 * np.arctan2(self.angle_sin, self.angle_cos)
        # atan2 returns pi for (sin, cos) = (0-, -1); fold the boundary
        a[a >= np.pi / 2] -= np.pi
        return a

    def width_px(self) -> np.ndarray:
        """Per-pixel gripper width in pixels."""
        return np.clip(self.width, 0.0, 1.0) * self.width_scale
