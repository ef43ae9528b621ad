"""JSON <-> dataclass helpers shared by every config type."""
from __future__ import annotations

import dataclasses
import json
from pathlib import Path

from .errors import ConfigError


def from_dict(cls, d: dict, where: str = ""):
    """Build dataclass ``cls`` from ``d``; unknown keys are errors."""
    if not isinstance(d, dict):
        raise ConfigError(f"{where or cls.__name__}: expected a JSON object")
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(d) - names)
    if unknown:
        raise ConfigError(f"{where or cls.__name__}: unknown keys {unknown}")
    try:
        return cls(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where or cls.__name__}: {exc}") from exc


def load_json(path) -> dict:
    """Read a JSON file, reporting syntax errors with line and column."""
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def load_config(cls, path):
    return from_dict(cls, load_json(path), where=str(path))


def to_dict(obj) -> dict:
    return dataclasses.asdict(obj)
