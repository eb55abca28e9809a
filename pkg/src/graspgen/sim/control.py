"""Grasp tracking with hysteresis and the proportional PBVS velocity law."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..geometry import GraspImage, GraspWorld


class NoGraspError(RuntimeError):
    """Raised when no grasp candidate is available this tick."""


@dataclass
class GripperState:
    """6-DoF end-effector pose plus finger opening."""

    position: np.ndarray                    # (x, y, z) meters
    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0
    finger_opening: float = 0.0
    opening_max: float = 0.15
    max_linear_speed: float = 0.25          # m/s
    max_angular_speed: float = 1.5          # rad/s

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        if not 0.0 <= self.finger_opening <= self.opening_max:
            raise ValueError("finger_opening outside [0, opening_max]")


@dataclass
class VelocityCommand:
    linear: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.linear = np.asarray(self.linear, dtype=float)
        self.angular = np.asarray(self.angular, dtype=float)


def select_tracked_grasp(candidates: list[GraspImage],
                         previous: GraspImage | None) -> GraspImage:
    """Sticky grasp selection.

    With no previous grasp, track the highest-quality candidate; otherwise
    pick the candidate nearest the previous one in the image plane, breaking
    distance ties by quality then (row, column) order.
    """
    if not candidates:
        raise NoGraspError("no grasp candidates")
    if previous is None:
        return max(candidates,
                   key=lambda g: (g.quality, -g.v, -g.u))
    return min(candidates,
               key=lambda g: (math.hypot(g.u - previous.u, g.v - previous.v),
                              -g.quality, g.v, g.u))


def signed_yaw_error(target: float, current: float) -> float:
    """Shortest signed yaw error under antipodal symmetry, in [-pi/2, pi/2)."""
    d = (target - current + math.pi / 2.0) % math.pi - math.pi / 2.0
    return d


def pbvs_velocity(current: GripperState, target: GraspWorld,
                  gain_linear: float = 2.0, gain_angular: float = 2.0,
                  feedforward: np.ndarray | None = None) -> VelocityCommand:
    """Proportional position-based servo command toward the target grasp.

    Linear velocity is the position error scaled by the gain (clamped to the
    gripper's max speed, direction preserved); only the yaw axis rotates --
    the gripper stays vertical for top-down grasping. An optional linear
    feedforward (estimated target velocity) is added before clamping.
    """
    if gain_linear <= 0 or gain_angular <= 0:
        raise ValueError("gains must be > 0")
    err = target.position - current.position
    v = gain_linear * err
    if feedforward is not None:
        v = v + feedforward
    speed = float(np.linalg.norm(v))
    if speed > current.max_linear_speed:
        v = v * (current.max_linear_speed / speed)

    wz = gain_angular * signed_yaw_error(target.angle, current.yaw)
    wz = float(np.clip(wz, -current.max_angular_speed,
                       current.max_angular_speed))
    return VelocityCommand(linear=v, angular=np.array([0.0, 0.0, wz]))
