from .scene import Scene, SceneObject, step_scene, render_depth, oracle_predict
from .control import (GripperState, VelocityCommand, select_tracked_grasp,
                      pbvs_velocity, NoGraspError)
from .episode import EpisodeConfig, EpisodeResult, run_episode, load_scene_file

__all__ = [
    "Scene",
    "SceneObject",
    "step_scene",
    "render_depth",
    "oracle_predict",
    "GripperState",
    "VelocityCommand",
    "select_tracked_grasp",
    "pbvs_velocity",
    "NoGraspError",
    "EpisodeConfig",
    "EpisodeResult",
    "run_episode",
    "load_scene_file",
]
