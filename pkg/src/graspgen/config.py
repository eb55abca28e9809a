"""Declarative run configuration: defaults < config file < command flags."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields, is_dataclass
from pathlib import Path

import yaml

from .network import NetworkConfig
from .sim.episode import EpisodeConfig
from .training import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass
class EvalConfig:
    checkpoint: str = ""
    smooth_sigma: float = 2.0
    iou_threshold: float = 0.25
    angle_threshold_deg: float = 30.0


@dataclass
class SimConfig:
    predictor: str = "oracle"        # oracle | model
    scenes: str = ""
    checkpoint: str = ""
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)


@dataclass
class AppConfig:
    dataset_root: str = ""
    out: str = "runs"
    seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    evaluation: EvalConfig = field(default_factory=EvalConfig)
    sim: SimConfig = field(default_factory=SimConfig)


def _apply(obj, values: dict, path: str = ""):
    names = {f.name: f for f in fields(obj)}
    for key, value in values.items():
        where = f"{path}.{key}" if path else key
        if key not in names:
            raise ConfigError(f"unknown key: {where}")
        current = getattr(obj, key)
        if is_dataclass(current) and isinstance(value, dict):
            _apply(current, value, where)
        else:
            f = names[key]
            try:
                coerced = _coerce(value, current, f)
            except (TypeError, ValueError):
                raise ConfigError(
                    f"type mismatch at {where}: expected "
                    f"{type(current).__name__}, got {type(value).__name__}")
            setattr(obj, key, coerced)


def _coerce(value, current, f):
    if isinstance(current, bool):
        if isinstance(value, bool):
            return value
        if isinstance(value, str):
            return value.lower() in ("1", "true", "yes")
        raise TypeError
    if isinstance(current, int) and not isinstance(current, bool):
        if isinstance(value, bool) or (isinstance(value, float)
                                       and value != int(value)):
            raise TypeError
        return int(value)
    if isinstance(current, float):
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            raise TypeError
        return float(value)
    if isinstance(current, str):
        return str(value)
    if isinstance(current, list):
        if not isinstance(value, (list, tuple)):
            raise TypeError
        return list(value)
    return value


def _set_dotted(tree: dict, dotted: str, value):
    parts = dotted.split(".")
    node = tree
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value


def parse_config(path=None, flag_overrides: dict | None = None) -> AppConfig:
    """Build the resolved AppConfig.

    `path` may be None (defaults only) or a YAML file with nested sections;
    `flag_overrides` maps dotted key paths (e.g. "train.input_size") to
    values and wins over the file.
    """
    cfg = AppConfig()
    if path is not None:
        data = yaml.safe_load(Path(path).read_text()) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path} must be a mapping")
        # revalidate dataclass invariants after the raw field writes
        _apply(cfg, data)
    if flag_overrides:
        tree: dict = {}
        for dotted, value in flag_overrides.items():
            _set_dotted(tree, dotted, value)
        _apply(cfg, tree)
    _revalidate(cfg)
    return cfg


def _revalidate(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        post = getattr(obj, "__post_init__", None)
        if post is not None:
            post()
        for f in fields(obj):
            _revalidate(getattr(obj, f.name))


def dump_config(cfg: AppConfig, path) -> None:
    """Echo the fully resolved config next to the run outputs."""
    Path(path).write_text(yaml.safe_dump(dataclasses.asdict(cfg),
                                         sort_keys=False))
