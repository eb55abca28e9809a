"""Command-line entry point: train / eval / predict / simulate / visualize."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .config import AppConfig, ConfigError, dump_config, parse_config

log = logging.getLogger("graspgen")

MODALITY_FLAGS = {"d": "d", "rgb": "rgb", "rgbd": "rgbd"}


def _run_dir(cfg: AppConfig, command: str) -> Path:
    stamp = time.strftime("%Y%m%d-%H%M%S")
    out = Path(cfg.out) / f"{stamp}-{command}"
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config.yaml")
    return out


def _dataset_root(cfg: AppConfig) -> Path:
    root = cfg.dataset_root or os.environ.get("GRASP_DATA_ROOT", "")
    if not root:
        raise FileNotFoundError(
            "no dataset root: pass --dataset-root or set GRASP_DATA_ROOT")
    return Path(root)


def _load_samples(cfg: AppConfig):
    from .datasets import load_cornell, load_jacquard

    root = _dataset_root(cfg)
    if cfg.train.dataset == "cornell":
        return load_cornell(root, cfg.train.input_size)
    if cfg.train.dataset == "jacquard":
        return load_jacquard(root, cfg.train.input_size)
    raise ConfigError(f"unknown dataset {cfg.train.dataset!r}")


def cmd_train(cfg: AppConfig) -> int:
    import dataclasses

    from .datasets import modality_channels, split
    from .network import build_network
    from .training import train

    out = _run_dir(cfg, "train")
    samples = _load_samples(cfg)
    tr, va = split(samples, cfg.train.split_mode, cfg.train.train_fraction,
                   cfg.train.seed)
    net = build_network(dataclasses.replace(
        cfg.network, input_channels=modality_channels(cfg.train.modality)))
    best = train(cfg.train, tr, va, out, net=net)
    log.info("best checkpoint: %s", best)
    return 0


def cmd_eval(cfg: AppConfig) -> int:
    from .datasets import split
    from .evaluation import benchmark_samples
    from .network import load_checkpoint

    if not cfg.evaluation.checkpoint:
        raise FileNotFoundError("eval requires --checkpoint")
    net = load_checkpoint(cfg.evaluation.checkpoint)
    out = _run_dir(cfg, "eval")
    samples = _load_samples(cfg)
    _, va = split(samples, cfg.train.split_mode, cfg.train.train_fraction,
                  cfg.train.seed)
    report = benchmark_samples(
        net, va, cfg.train.modality, dataset=cfg.train.dataset,
        width_scale=cfg.train.width_scale,
        smooth_sigma=cfg.evaluation.smooth_sigma, out_dir=out)
    print(json.dumps(asdict(report), indent=2))
    return 0


def cmd_predict(cfg: AppConfig, image: str, depth: str | None) -> int:
    from PIL import Image

    from .datasets.samples import GraspSample
    from .evaluation import extract_grasps, predict_sample, render_heatmaps
    from .network import load_checkpoint

    if not cfg.evaluation.checkpoint:
        raise FileNotFoundError("predict requires --checkpoint")
    net = load_checkpoint(cfg.evaluation.checkpoint)
    out = _run_dir(cfg, "predict")

    rgb = np.asarray(Image.open(image).convert("RGB"))
    if depth:
        depth_plane = np.asarray(Image.open(depth), dtype=np.float32)
    else:
        depth_plane = np.ones(rgb.shape[:2], dtype=np.float32)
    sample = GraspSample(id=Path(image).stem, rgb=rgb, depth=depth_plane,
                        rectangles=[])
    maps, f_ms, t_ms = predict_sample(net, sample, cfg.train.modality,
                                      cfg.train.width_scale,
                                      cfg.evaluation.smooth_sigma)
    grasps = extract_grasps(maps, k=5)
    written = render_heatmaps(maps, grasps, out, rgb=rgb)
    log.info("forward %.1f ms, end-to-end %.1f ms; wrote %d files",
             f_ms, t_ms, len(written))
    return 0


def cmd_simulate(cfg: AppConfig) -> int:
    from .sim import run_episode
    from .sim.episode import default_camera, load_scene_file, model_predictor
    from .sim.control import GripperState
    from .sim.scene import oracle_predict

    out = _run_dir(cfg, "simulate")
    scene_dir = Path(cfg.sim.scenes)
    if not scene_dir.exists():
        raise FileNotFoundError(f"scene path not found: {scene_dir}")
    scene_files = sorted(scene_dir.glob("*.yaml")) if scene_dir.is_dir() \
        else [scene_dir]

    if cfg.sim.predictor == "model":
        from .network import load_checkpoint
        if not cfg.sim.checkpoint:
            raise FileNotFoundError("simulate with --predictor model "
                                    "requires --checkpoint")
        predictor = model_predictor(load_checkpoint(cfg.sim.checkpoint),
                                    cfg.train.modality)
    else:
        predictor = oracle_predict

    n_success = 0
    for path in scene_files:
        scene, cam_height = load_scene_file(path)
        cam = default_camera(cfg.sim.episode.image_size, cam_height)
        gripper = GripperState(position=np.array([0.0, 0.0, cam_height - 0.1]))
        result = run_episode(scene, predictor, cam, gripper, cfg.sim.episode)
        (out / f"{path.stem}.json").write_text(result.to_json())
        n_success += result.success
        log.info("%s: %s in %d steps", path.stem,
                 "success" if result.success else "failure", result.steps)
    log.info("episodes: %d/%d successful", n_success, len(scene_files))
    return 0


def cmd_visualize(cfg: AppConfig, maps_path: str) -> int:
    from .evaluation import extract_grasps, render_heatmaps
    from .maps import GraspMaps

    out = _run_dir(cfg, "visualize")
    blob = np.load(maps_path)
    maps = GraspMaps(blob["quality"], blob["angle_sin"], blob["angle_cos"],
                     blob["width"],
                     float(blob.get("width_scale", cfg.train.width_scale)))
    grasps = extract_grasps(maps, k=5)
    render_heatmaps(maps, grasps, out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="graspgen",
                                description="Pixel-wise grasp generation")
    p.add_argument("command",
                   choices=["train", "eval", "predict", "simulate", "visualize"])
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--dataset-root")
    p.add_argument("--modality", choices=sorted(MODALITY_FLAGS))
    p.add_argument("--input-size", type=int)
    p.add_argument("--checkpoint")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--predictor", choices=["oracle", "model"])
    p.add_argument("--scenes")
    p.add_argument("--image", help="input image for predict")
    p.add_argument("--depth", help="depth image for predict")
    p.add_argument("--maps", help="saved .npz grasp maps for visualize")
    return p


def _overrides_from_args(args) -> dict:
    overrides = {}
    if args.dataset_root is not None:
        overrides["dataset_root"] = args.dataset_root
    if args.modality is not None:
        overrides["train.modality"] = args.modality
    if args.input_size is not None:
        overrides["train.input_size"] = args.input_size
    if args.checkpoint is not None:
        overrides["evaluation.checkpoint"] = args.checkpoint
        overrides["sim.checkpoint"] = args.checkpoint
    if args.out is not None:
        overrides["out"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
        overrides["train.seed"] = args.seed
    if args.predictor is not None:
        overrides["sim.predictor"] = args.predictor
    if args.scenes is not None:
        overrides["sim.scenes"] = args.scenes
    return overrides


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config, _overrides_from_args(args))
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "eval":
            return cmd_eval(cfg)
        if args.command == "predict":
            if not args.image:
                raise FileNotFoundError("predict requires --image")
            return cmd_predict(cfg, args.image, args.depth)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "visualize":
            if not args.maps:
                raise FileNotFoundError("visualize requires --maps")
            return cmd_visualize(cfg, args.maps)
        return 2
    except (ConfigError, FileNotFoundError, ValueError) as e:
        log.error("%s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
