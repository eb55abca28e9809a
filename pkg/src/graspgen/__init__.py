"""Pixel-wise planar grasp generation with closed-loop visual servoing."""

from .geometry import (
    CameraModel,
    GraspImage,
    GraspRectangle,
    GraspWorld,
    angle_offset,
    grasp_from_rect,
    grasp_image_to_world,
    image_to_camera,
    rect_from_grasp,
    rect_iou,
    wrap_angle,
)
from .maps import DEFAULT_WIDTH_SCALE, GraspMaps

__all__ = [
    "CameraModel",
    "GraspImage",
    "GraspRectangle",
    "GraspWorld",
    "GraspMaps",
    "DEFAULT_WIDTH_SCALE",
    "angle_offset",
    "grasp_from_rect",
    "grasp_image_to_world",
    "image_to_camera",
    "rect_from_grasp",
    "rect_iou",
    "wrap_angle",
]

__version__ = "0.1.0"
