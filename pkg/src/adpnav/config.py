"""YAML/JSON experiment configs mapped onto the package dataclasses.

A config file is a mapping with optional sections::

    env:      {laser_pool: 10, planner: {variant: mppi, weights: {w_clearance: 0.5}}, reward: {...}}
    td3:      {actor_hidden: [32], batch_size: 64}
    train:    {cycles: 20, actor_count: 2, action_space: dec}
    worlds:   {seed: 0, count: 5, width: 30, height: 30}
    bench:    {runs: 20, trim: 5, v_max: 1.5}

Unknown keys are rejected so typos fail loudly.
"""

from __future__ import annotations

import dataclasses
import json
import typing
from pathlib import Path
from typing import Any

import yaml

from .env import EnvConfig
from .errors import ConfigError
from .rl.td3 import Td3Config
from .training import TrainConfig

SECTIONS = ("env", "td3", "train", "worlds", "bench")


def load_config(path: str | Path | None) -> dict:
    if path is None:
        return {}
    text = Path(path).read_text()
    try:
        data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(data) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    return data


def _coerce(tp: Any, value: Any) -> Any:
    if dataclasses.is_dataclass(tp) and isinstance(value, dict):
        return from_dict(tp, value)
    origin = typing.get_origin(tp)
    if origin is tuple and isinstance(value, (list, tuple)):
        return tuple(value)
    return value


def from_dict(cls: type, data: dict | None) -> Any:
    """Build dataclass ``cls`` from a (possibly nested) mapping."""
    data = data or {}
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = {k: _coerce(hints[k], v) for k, v in data.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {cls.__name__} config: {exc}") from exc


def env_config(cfg: dict) -> EnvConfig:
    return from_dict(EnvConfig, cfg.get("env"))


def train_config(cfg: dict, **overrides) -> TrainConfig:
    train = dict(cfg.get("train") or {})
    train.update({k: v for k, v in overrides.items() if v is not None})
    return dataclasses.replace(
        from_dict(TrainConfig, train), env=env_config(cfg), td3=from_dict(Td3Config, cfg.get("td3"))
    )
