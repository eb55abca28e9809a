"""Planar table-top scene: moving rectangular blocks, a synthetic top-down
depth camera, and an analytic ground-truth grasp predictor."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..geometry import (CameraModel, GraspRectangle, wrap_angle,
                        world_angle_to_image)
from ..maps import DEFAULT_WIDTH_SCALE, GraspMaps
from ..datasets.samples import rasterize_labels

# Commanded opening relative to the object's narrow extent, so the fingers
# clear the object before closing.
ORACLE_WIDTH_RATIO = 1.4


@dataclass
class SceneObject:
    """Extruded rectangular block on the table plane (z = 0 at the table)."""

    id: str
    center: np.ndarray            # (x, y) meters
    yaw: float                    # radians
    half_extents: np.ndarray      # (a, b) meters, a along yaw direction
    height: float = 0.02
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))
    angular_velocity: float = 0.0

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.half_extents = np.asarray(self.half_extents, dtype=float)
        self.velocity = np.asarray(self.velocity, dtype=float)
        if (self.half_extents <= 0).any():
            raise ValueError("half_extents must be > 0")

    @property
    def narrow_extent(self) -> float:
        return 2.0 * float(self.half_extents.min())

    @property
    def grasp_yaw(self) -> float:
        """World yaw of the closing direction (across the narrow axis)."""
        if self.half_extents[0] <= self.half_extents[1]:
            return wrap_angle(self.yaw)
        return wrap_angle(self.yaw + math.pi / 2.0)


@dataclass
class Scene:
    objects: list[SceneObject]
    bounds: tuple[float, float, float, float] = (-0.3, 0.3, -0.3, 0.3)
    table_z: float = 0.0


def step_scene(scene: Scene, dt: float) -> Scene:
    """Advance every object by one Euler step; reflect at workspace bounds."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    xmin, xmax, ymin, ymax = scene.bounds
    objects = []
    for o in scene.objects:
        center = o.center + o.velocity * dt
        velocity = o.velocity.copy()
        if not xmin <= center[0] <= xmax:
            velocity[0] = -velocity[0]
            center[0] = np.clip(center[0], xmin, xmax)
        if not ymin <= center[1] <= ymax:
            velocity[1] = -velocity[1]
            center[1] = np.clip(center[1], ymin, ymax)
        yaw = wrap_angle(o.yaw + o.angular_velocity * dt)
        objects.append(replace(o, center=center, yaw=yaw, velocity=velocity))
    return replace(scene, objects=objects)


def _footprint_mask(o: SceneObject, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Membership of world points (xs, ys) inside the object's footprint."""
    dx = xs - o.center[0]
    dy = ys - o.center[1]
    c, s = math.cos(o.yaw), math.sin(o.yaw)
    along = dx * c + dy * s
    across = -dx * s + dy * c
    return (np.abs(along) <= o.half_extents[0]) & \
           (np.abs(across) <= o.half_extents[1])


def render_depth(scene: Scene, cam: CameraModel, h: int, w: int) -> np.ndarray:
    """Ray-cast depth image for a top-down camera above the table.

    Pixels over an object read the depth of its top face; everything else
    reads the table depth.
    """
    cam_z = float(cam.translation[2])
    us = np.arange(w)
    vs = np.arange(h)
    uu, vv = np.meshgrid(us, vs)
    # camera-frame ray directions, z component 1
    rx = (uu - cam.cx) / cam.fx
    ry = (vv - cam.cy) / cam.fy
    r = cam.rotation
    # world-frame direction per pixel
    dx = r[0, 0] * rx + r[0, 1] * ry + r[0, 2]
    dy = r[1, 0] * rx + r[1, 1] * ry + r[1, 2]
    dz = r[2, 0] * rx + r[2, 1] * ry + r[2, 2]

    def hit(plane_z):
        """(x, y, depth) where each ray crosses the horizontal plane."""
        t = (plane_z - cam_z) / dz
        return cam.translation[0] + t * dx, cam.translation[1] + t * dy, t

    _, _, t_table = hit(scene.table_z)
    depth = t_table.astype(np.float32)
    for o in sorted(scene.objects, key=lambda o: o.height):
        x, y, t = hit(scene.table_z + o.height)
        inside = _footprint_mask(o, x, y)
        depth[inside] = t[inside]
    return depth


def project_object_grasp(o: SceneObject, scene: Scene,
                         cam: CameraModel) -> GraspRectangle:
    """Analytic best grasp of a block, as an image-frame rectangle."""
    top = np.array([o.center[0], o.center[1], scene.table_z + o.height])
    p_cam = cam.world_to_camera(top)
    u, v = cam.project(p_cam)
    depth = p_cam[2]
    angle = world_angle_to_image(o.grasp_yaw, cam)
    width_px = ORACLE_WIDTH_RATIO * o.narrow_extent * cam.fx / depth
    jaw_px = 2.0 * float(o.half_extents.max()) * cam.fx / depth
    return GraspRectangle(u, v, angle, width_px, jaw_px)


def oracle_predict(scene: Scene, cam: CameraModel, h: int, w: int,
                   width_scale: float = DEFAULT_WIDTH_SCALE) -> GraspMaps:
    """Ground-truth grasp maps rasterized from the analytic object poses."""
    rects = [project_object_grasp(o, scene, cam) for o in scene.objects]
    return rasterize_labels(rects, h, w, width_scale)
