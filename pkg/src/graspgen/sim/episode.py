"""Closed-loop grasping episode: render -> predict -> track -> servo at a
fixed simulated rate until the grasp pose is reached or the episode times
out."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml
from scipy import ndimage

from ..geometry import (CameraModel, GraspImage, GraspWorld, angle_offset,
                        grasp_image_to_world)
from ..maps import DEFAULT_WIDTH_SCALE, GraspMaps
from .control import (GripperState, NoGraspError, VelocityCommand,
                      pbvs_velocity, select_tracked_grasp)
from .scene import Scene, SceneObject, oracle_predict, render_depth, step_scene


@dataclass
class EpisodeConfig:
    image_size: int = 224
    rate_hz: float = 50.0
    num_candidates: int = 5
    min_peak_distance: int = 10
    smooth_sigma: float = 2.0
    gain_linear: float = 2.0
    gain_angular: float = 2.0
    position_tolerance: float = 0.002      # meters
    yaw_tolerance: float = math.radians(1.0)
    timeout: float = 15.0                  # simulated seconds
    descend_planar_threshold: float = 0.02 # start descending below this error
    velocity_feedforward: bool = True
    width_scale: float = DEFAULT_WIDTH_SCALE

    @property
    def dt(self) -> float:
        return 1.0 / self.rate_hz


@dataclass
class TrajectoryPoint:
    time: float
    gripper_position: tuple[float, float, float]
    gripper_yaw: float
    tracked_u: float | None
    tracked_v: float | None
    tracked_angle: float | None


@dataclass
class EpisodeResult:
    success: bool
    steps: int
    final_position_error: float
    final_angle_error: float
    trajectory: list[TrajectoryPoint]

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def default_camera(image_size: int = 224, height: float = 0.5,
                   fx: float = 400.0) -> CameraModel:
    """Fixed camera above the workspace center looking straight down."""
    c = (image_size - 1) / 2.0
    return CameraModel.top_down(fx, fx, c, c, height)


def _smoothed(maps: GraspMaps, sigma: float) -> GraspMaps:
    if sigma <= 0:
        return maps
    return replace(maps, quality=ndimage.gaussian_filter(maps.quality, sigma))


def _nearest_object(scene: Scene, x: float, y: float) -> SceneObject:
    return min(scene.objects,
               key=lambda o: (o.center[0] - x) ** 2 + (o.center[1] - y) ** 2)


def run_episode(scene: Scene, predictor, cam: CameraModel,
                gripper: GripperState, config: EpisodeConfig | None = None
                ) -> EpisodeResult:
    """Run one closed-loop grasp attempt.

    predictor(scene, cam, h, w) must return GraspMaps; pass oracle_predict
    for the analytic ground-truth predictor or model_predictor(...) for a
    trained network. Success means the gripper pose matches the tracked
    world grasp within the position/yaw tolerances with the fingers opened
    wide enough to clear the target object.
    """
    from ..evaluation import extract_grasps   # local to avoid a module cycle

    cfg = config or EpisodeConfig()
    h = w = cfg.image_size
    n_steps = int(round(cfg.timeout * cfg.rate_hz))
    gripper = replace(gripper, position=gripper.position.copy())

    previous: GraspImage | None = None
    prev_target: np.ndarray | None = None
    feedforward = np.zeros(3)
    trajectory: list[TrajectoryPoint] = []
    final_pos_err = math.inf
    final_ang_err = math.inf

    for step in range(n_steps):
        t = step * cfg.dt
        depth_img = render_depth(scene, cam, h, w)
        maps = _smoothed(predictor(scene, cam, h, w), cfg.smooth_sigma)
        candidates = extract_grasps(maps, cfg.num_candidates,
                                    cfg.min_peak_distance)
        try:
            tracked = select_tracked_grasp(candidates, previous)
        except NoGraspError:
            trajectory.append(TrajectoryPoint(
                t, tuple(gripper.position), gripper.yaw, None, None, None))
            scene = step_scene(scene, cfg.dt)
            continue
        previous = tracked

        depth_at = float(depth_img[int(round(tracked.v)),
                                   int(round(tracked.u))])
        target = grasp_image_to_world(tracked, depth_at, cam)

        if cfg.velocity_feedforward and prev_target is not None:
            raw_ff = (target.position - prev_target) / cfg.dt
            # drop jumps from switching peaks and low-pass the pixel
            # quantization noise; the mean tracks the object velocity
            if np.linalg.norm(raw_ff) > gripper.max_linear_speed:
                raw_ff = np.zeros(3)
            feedforward = 0.9 * feedforward + 0.1 * raw_ff
        prev_target = target.position

        planar_err = float(np.hypot(target.x - gripper.position[0],
                                    target.y - gripper.position[1]))
        servo_target = target
        if planar_err >= cfg.descend_planar_threshold:
            # hold altitude until the planar error is small
            servo_target = GraspWorld(target.x, target.y, gripper.position[2],
                                      target.angle, target.width,
                                      target.quality)
        cmd = pbvs_velocity(gripper, servo_target, cfg.gain_linear,
                            cfg.gain_angular,
                            feedforward if cfg.velocity_feedforward else None)

        gripper.position = gripper.position + cmd.linear * cfg.dt
        gripper.yaw = gripper.yaw + cmd.angular[2] * cfg.dt
        gripper.finger_opening = min(target.width, gripper.opening_max)

        trajectory.append(TrajectoryPoint(
            t, tuple(gripper.position), gripper.yaw,
            tracked.u, tracked.v, tracked.angle))

        final_pos_err = float(np.linalg.norm(target.position - gripper.position))
        final_ang_err = angle_offset(gripper.yaw, target.angle)
        obj = _nearest_object(scene, target.x, target.y)
        clearance_ok = (obj.narrow_extent <= gripper.finger_opening
                        <= gripper.opening_max)
        if (final_pos_err <= cfg.position_tolerance
                and final_ang_err <= cfg.yaw_tolerance and clearance_ok):
            return EpisodeResult(True, step + 1, final_pos_err, final_ang_err,
                                 trajectory)

        scene = step_scene(scene, cfg.dt)

    return EpisodeResult(False, n_steps, final_pos_err, final_ang_err,
                         trajectory)


def model_predictor(net, modality: str = "d",
                    width_scale: float = DEFAULT_WIDTH_SCALE,
                    smooth_sigma: float = 0.0):
    """Adapt a trained network to the episode predictor interface.

    Renders the depth image, builds the network input and decodes the raw
    output planes (smoothing is left to the episode loop).
    """
    from ..datasets.samples import GraspSample, normalize_inputs
    from ..evaluation import decode_maps
    import torch

    def predict(scene: Scene, cam: CameraModel, h: int, w: int) -> GraspMaps:
        depth = render_depth(scene, cam, h, w)
        rgb = np.zeros((h, w, 3), dtype=np.uint8)
        sample = GraspSample(id="sim", rgb=rgb, depth=depth, rectangles=[
            # placeholder rectangle: normalize_inputs never reads it
        ])
        x = torch.from_numpy(normalize_inputs(sample, modality)).unsqueeze(0)
        with torch.no_grad():
            net.eval()
            raw = net(x)
        return decode_maps(raw, width_scale, smooth_sigma)

    return predict


def load_scene_file(path) -> tuple[Scene, float]:
    """Read a declarative YAML scene description.

    Returns (scene, camera_height). Schema:
        camera_height: 0.5
        bounds: [xmin, xmax, ymin, ymax]
        objects:
          - id: block
            center: [x, y]
            yaw: 0.0
            half_extents: [a, b]
            height: 0.02
            velocity: [vx, vy]
            angular_velocity: 0.0
    """
    data = yaml.safe_load(Path(path).read_text())
    objects = [
        SceneObject(
            id=str(o.get("id", f"object_{i}")),
            center=np.asarray(o["center"], dtype=float),
            yaw=float(o.get("yaw", 0.0)),
            half_extents=np.asarray(o["half_extents"], dtype=float),
            height=float(o.get("height", 0.02)),
            velocity=np.asarray(o.get("velocity", [0.0, 0.0]), dtype=float),
            angular_velocity=float(o.get("angular_velocity", 0.0)),
        )
        for i, o in enumerate(data.get("objects", []))
    ]
    bounds = tuple(data.get("bounds", (-0.3, 0.3, -0.3, 0.3)))
    scene = Scene(objects=objects, bounds=bounds)
    return scene, float(data.get("camera_height", 0.5))
