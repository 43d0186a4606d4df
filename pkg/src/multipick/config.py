"""YAML run configuration: load, validate and dump :class:`RunConfig`.

Every section maps onto one of the package dataclasses; unknown keys and
wrongly typed values are rejected with the dotted path of the offending key.
"""

from __future__ import annotations

import enum
import typing
from dataclasses import fields, is_dataclass
from pathlib import Path
from typing import Any, Union

import numpy as np
import yaml

from .errors import ConfigError
from .executor import RunConfig
from .spatial import Pose, Wrench

DEFAULT_CONFIG_PATH = Path(__file__).with_name("data") / "default.yaml"


def _number(value, path: str, kind: type):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return int(value)
    return float(value)


def _mapping(value, path: str, allowed) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(value).__name__}")
    unknown = sorted(set(value) - set(allowed))
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {', '.join(map(str, unknown))}")
    return value


def _vector(value, path: str, n: int) -> list:
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise ConfigError(f"{path}: expected a list of {n} numbers")
    return [_number(v, f"{path}[{i}]", float) for i, v in enumerate(value)]


def _convert(value, hint, path: str):
    origin = typing.get_origin(hint)
    if origin is Union:
        args = [a for a in typing.get_args(hint) if a is not type(None)]
        if value is None:
            return None
        return _convert(value, args[0], path)
    if hint is Pose:
        d = _mapping(value, path, ("position", "orientation"))
        if "position" not in d:
            raise ConfigError(f"{path}: pose needs a position")
        position = _vector(d["position"], f"{path}.position", 3)
        if "orientation" not in d:
            return Pose(position)
        return Pose(position, _vector(d["orientation"], f"{path}.orientation", 4))
    if hint is Wrench:
        d = _mapping(value, path, ("force", "torque"))
        return Wrench(_vector(d.get("force", [0, 0, 0]), f"{path}.force", 3),
                      _vector(d.get("torque", [0, 0, 0]), f"{path}.torque", 3))
    if is_dataclass(hint):
        return _build(hint, value, path)
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if hint in (int, float):
        return _number(value, path, hint)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if hint is tuple or origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: expected a list, got {value!r}")
        return tuple(value)
    return value


def _build(cls, data, path: str):
    names = [f.name for f in fields(cls) if f.init]
    data = _mapping(data if data is not None else {}, path or "<root>", names)
    hints = typing.get_type_hints(cls)
    kwargs = {name: _convert(data[name], hints[name], f"{path}.{name}" if path else name)
              for name in names if name in data}
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path or '<root>'}: {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    return _build(RunConfig, data, "")


def load_config(path=None) -> RunConfig:
    """Parse and validate a YAML config; ``None`` loads the bundled defaults."""
    path = Path(path) if path is not None else DEFAULT_CONFIG_PATH
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from exc
    return config_from_dict(data if data is not None else {})


def _plain(value) -> Any:
    if is_dataclass(value):
        return {f.name: _plain(getattr(value, f.name)) for f in fields(value) if f.init}
    if isinstance(value, Pose):
        return {"position": _plain(value.position), "orientation": _plain(value.orientation)}
    if isinstance(value, Wrench):
        return {"force": _plain(value.force), "torque": _plain(value.torque)}
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, np.ndarray):
        return [float(v) for v in value]
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def config_to_dict(config: RunConfig) -> dict:
    return _plain(config)


def dump_config(config: RunConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(config_to_dict(config), sort_keys=False))
