"""Planar grasp representations, oriented rectangles and frame transforms.

Conventions used throughout the package:
  * image coordinates: u = column (right), v = row (down), in pixels
  * grasp angles are wrapped into [-pi/2, pi/2); a parallel-jaw grasp at
    phi and phi + pi is physically identical, so everything is mod pi
  * rectangle "width" is the graspable extent along the closing direction,
    "height" is the jaw size perpendicular to it
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class AnnotationError(ValueError):
    """Raised when a rectangle annotation cannot be parsed."""


def wrap_angle(a: float) -> float:
    """Wrap an angle into [-pi/2, pi/2) modulo pi."""
    if not math.isfinite(a):
        raise ValueError(f"angle must be finite, got {a!r}")
    return (a + math.pi / 2.0) % math.pi - math.pi / 2.0


def angle_offset(a: float, b: float) -> float:
    """Smallest offset between two grasp angles under antipodal symmetry.

    Returns a value in [0, pi/2]: min(|d|, pi - |d|) with d = (a - b) mod pi.
    """
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError(f"angles must be finite, got {a!r}, {b!r}")
    d = abs(a - b) % math.pi
    return min(d, math.pi - d)


@dataclass(frozen=True)
class GraspImage:
    """A single grasp in image coordinates: (u, v, angle, width, quality)."""

    u: float
    v: float
    angle: float
    width: float
    quality: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "angle", wrap_angle(self.angle))
        if self.width < 0:
            raise ValueError(f"width must be >= 0, got {self.width}")
        if not 0.0 <= self.quality <= 1.0:
            raise ValueError(f"quality must be in [0, 1], got {self.quality}")


@dataclass(frozen=True)
class GraspWorld:
    """A grasp in world coordinates: position (m), yaw about world z, width (m)."""

    x: float
    y: float
    z: float
    angle: float
    width: float
    quality: float = 1.0

    def __post_init__(self):
        if self.width < 0:
            raise ValueError(f"width must be >= 0, got {self.width}")
        if not 0.0 <= self.quality <= 1.0:
            raise ValueError(f"quality must be in [0, 1], got {self.quality}")

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class GraspRectangle:
    """Oriented rectangle: center (u, v), angle, width (closing extent), height (jaw)."""

    center_u: float
    center_v: float
    angle: float
    width: float
    height: float

    def __post_init__(self):
        object.__setattr__(self, "angle", wrap_angle(self.angle))
        if self.width < 0 or self.height < 0:
            raise ValueError("width and height must be >= 0")

    @property
    def is_degenerate(self) -> bool:
        return self.width == 0.0 or self.height == 0.0

    def corners(self) -> np.ndarray:
        """4x2 corner array (u, v), consistent counter-clockwise order."""
        d = np.array([math.cos(self.angle), math.sin(self.angle)])
        n = np.array([-math.sin(self.angle), math.cos(self.angle)])
        c = np.array([self.center_u, self.center_v])
        hw, hh = self.width / 2.0, self.height / 2.0
        return np.array([
            c - hw * d - hh * n,
            c + hw * d - hh * n,
            c + hw * d + hh * n,
            c - hw * d + hh * n,
        ])

    def as_grasp(self, quality: float = 1.0) -> GraspImage:
        return GraspImage(self.center_u, self.center_v, self.angle,
                          self.width, quality)

    def translated(self, du: float, dv: float) -> "GraspRectangle":
        return GraspRectangle(self.center_u + du, self.center_v + dv,
                              self.angle, self.width, self.height)

    def mask(self, h: int, w: int) -> np.ndarray:
        """Boolean pixel-center membership mask on an h x w canvas.

        Degenerate rectangles rasterize to strips at most one pixel wide
        (half extents are clamped to 0.5 px).
        """
        return _rect_mask(self, h, w)


def _rect_mask(rect: GraspRectangle, h: int, w: int,
               width_fraction: float = 1.0) -> np.ndarray:
    """Membership mask, optionally restricted to a central band of the
    closing axis (width_fraction < 1 keeps only that central fraction)."""
    d = np.array([math.cos(rect.angle), math.sin(rect.angle)])
    n = np.array([-math.sin(rect.angle), math.cos(rect.angle)])
    half_w = max(rect.width * width_fraction / 2.0, 0.5)
    half_h = max(rect.height / 2.0, 0.5)

    # limit work to the rectangle's bounding box
    corners = rect.corners()
    u0 = max(int(math.floor(corners[:, 0].min() - 1)), 0)
    u1 = min(int(math.ceil(corners[:, 0].max() + 1)), w - 1)
    v0 = max(int(math.floor(corners[:, 1].min() - 1)), 0)
    v1 = min(int(math.ceil(corners[:, 1].max() + 1)), h - 1)
    mask = np.zeros((h, w), dtype=bool)
    if u1 < u0 or v1 < v0:
        return mask

    us = np.arange(u0, u1 + 1)
    vs = np.arange(v0, v1 + 1)
    uu, vv = np.meshgrid(us, vs)
    pu = uu - rect.center_u
    pv = vv - rect.center_v
    along = pu * d[0] + pv * d[1]
    across = pu * n[0] + pv * n[1]
    inside = (np.abs(along) <= half_w) & (np.abs(across) <= half_h)
    mask[v0:v1 + 1, u0:u1 + 1] = inside
    return mask


def rect_from_grasp(g: GraspImage, height: float) -> GraspRectangle:
    """Realize a grasp as an oriented rectangle with the given jaw size."""
    if height <= 0:
        raise ValueError(f"height must be > 0, got {height}")
    return GraspRectangle(g.u, g.v, g.angle, g.width, height)


def grasp_from_rect(corners, tol: float = 0.5) -> GraspRectangle:
    """Recover (center, angle, width, height) from 4 corner points.

    Corners may be in either winding order and carry up to `tol` px of
    non-rectangularity (dataset noise). Raises AnnotationError for NaN,
    collinear, or badly non-rectangular input.
    """
    pts = np.asarray(corners, dtype=float)
    if pts.shape != (4, 2):
        raise AnnotationError(f"expected 4 corners, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise AnnotationError("corner coordinates contain NaN/inf")

    center = pts.mean(axis=0)
    e0 = pts[1] - pts[0]
    e2 = pts[3] - pts[2]
    width = (np.linalg.norm(e0) + np.linalg.norm(e2)) / 2.0
    height = (np.linalg.norm(pts[2] - pts[1]) + np.linalg.norm(pts[0] - pts[3])) / 2.0
    if np.linalg.norm(e0) < 1e-9:
        raise AnnotationError("first edge is degenerate")
    a01 = pts[1] - pts[0]
    a02 = pts[2] - pts[0]
    if abs(a01[0] * a02[1] - a01[1] * a02[0]) < 1e-9:
        raise AnnotationError("corners are collinear")
    angle = math.atan2(e0[1], e0[0])

    # winding-independent rectangularity check: every corner must sit at
    # (+-width/2, +-height/2) in the (d, n) frame of the first edge
    d = e0 / np.linalg.norm(e0)
    n = np.array([-d[1], d[0]])
    rel = pts - center
    along = rel @ d
    across = rel @ n
    err = max(np.abs(np.abs(along) - width / 2.0).max(),
              np.abs(np.abs(across) - height / 2.0).max())
    if err > tol:
        raise AnnotationError(
            f"corners deviate {err:.3f} px from a rectangle (tol {tol})")
    return GraspRectangle(center[0], center[1], wrap_angle(angle), width, height)


def rect_iou(a: GraspRectangle, b: GraspRectangle, canvas: tuple[int, int]) -> float:
    """Rasterized intersection-over-union of two rectangles on an H x W canvas.

    Pixel-center membership rasterization; area outside the canvas is
    excluded from both rectangles. Returns 0 for an empty union.
    """
    h, w = canvas
    ma = a.mask(h, w)
    mb = b.mask(h, w)
    union = np.count_nonzero(ma | mb)
    if union == 0:
        return 0.0
    inter = np.count_nonzero(ma & mb)
    return inter / union


def _orthonormal(r: np.ndarray, tol: float = 1e-9) -> bool:
    return (np.abs(r @ r.T - np.eye(3)).max() <= tol
            and abs(np.linalg.det(r) - 1.0) <= tol)


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics plus the camera-to-world rigid transform."""

    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be > 0")
        r = np.asarray(self.rotation, dtype=float)
        t = np.asarray(self.translation, dtype=float)
        if r.shape != (3, 3) or not _orthonormal(r):
            raise ValueError("rotation must be orthonormal with det +1")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def top_down(cls, fx: float, fy: float, cx: float, cy: float,
                 height: float) -> "CameraModel":
        """Camera at (0, 0, height) looking straight down at the z=0 plane.

        Camera x aligns with world x; camera z points along -z world.
        """
        r = np.array([[1.0, 0.0, 0.0],
                      [0.0, -1.0, 0.0],
                      [0.0, 0.0, -1.0]])
        return cls(fx, fy, cx, cy, r, np.array([0.0, 0.0, height]))

    def camera_to_world(self, p_cam: np.ndarray) -> np.ndarray:
        return self.rotation @ np.asarray(p_cam, dtype=float) + self.translation

    def world_to_camera(self, p_world: np.ndarray) -> np.ndarray:
        return self.rotation.T @ (np.asarray(p_world, dtype=float) - self.translation)

    def project(self, p_cam: np.ndarray) -> tuple[float, float]:
        """Camera-frame point -> pixel (u, v). Requires positive depth."""
        x, y, z = p_cam
        if z <= 0:
            raise ValueError(f"point behind camera (Z={z})")
        return self.cx + self.fx * x / z, self.cy + self.fy * y / z


def image_to_camera(u: float, v: float, depth: float,
                    cam: CameraModel) -> np.ndarray:
    """Back-project a pixel at the given depth into the camera frame."""
    if not math.isfinite(depth) or depth <= 0:
        raise ValueError(f"depth must be finite and > 0, got {depth!r}")
    return np.array([
        (u - cam.cx) * depth / cam.fx,
        (v - cam.cy) * depth / cam.fy,
        depth,
    ])


def image_angle_to_world(angle: float, cam: CameraModel) -> float:
    """Map a grasp angle in the image plane to a world yaw about z."""
    d_cam = np.array([math.cos(angle), math.sin(angle), 0.0])
    d_world = cam.rotation @ d_cam
    return wrap_angle(math.atan2(d_world[1], d_world[0]))


def world_angle_to_image(yaw: float, cam: CameraModel) -> float:
    """Inverse of image_angle_to_world for a top-down-style camera."""
    d_world = np.array([math.cos(yaw), math.sin(yaw), 0.0])
    d_cam = cam.rotation.T @ d_world
    return wrap_angle(math.atan2(d_cam[1], d_cam[0]))


def grasp_image_to_world(g: GraspImage, depth_at_p: float,
                         cam: CameraModel) -> GraspWorld:
    """Lift an image-frame grasp to the world frame.

    Position goes through the pinhole back-projection and the camera pose;
    the gripper width converts px -> m by similar triangles at the grasp
    depth (w_m = w_px * depth / fx).
    """
    p_world = cam.camera_to_world(image_to_camera(g.u, g.v, depth_at_p, cam))
    angle = image_angle_to_world(g.angle, cam)
    width_m = g.width * depth_at_p / cam.fx
    return GraspWorld(p_world[0], p_world[1], p_world[2], angle, width_m,
                      g.quality)
