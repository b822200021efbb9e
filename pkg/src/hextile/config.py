"""Run configuration: a YAML document with a fixed, versioned schema."""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

SCHEMA_VERSION = 1

DEFAULTS: dict[str, Any] = {
    "schema_version": SCHEMA_VERSION,
    "aperture": {"rings": 4, "cell_side": math.sqrt(3.0) / 4.0},
    "mask": {"center": [0.0, 0.0], "extent": [0.9, 0.9], "floor_db": -20.0, "shape": "rectangle"},
    "reference": {"kind": "uniform", "exponent": 1.0, "radius": None, "path": None, "steer": [0.0, 0.0]},
    "grid": 201,
    "element": {"kind": "isotropic", "q": 1.0},
    "ga": {
        "population": 542,
        "iterations": 1000,
        "crossover": 0.9,
        "mutation": 0.01,
        "stall_window": 50,
        "stall_threshold": 1e-4,
        "diversity": 0.1,
        "retries": 100,
    },
    "edm": {"budget_seconds": 3600.0, "batch_size": 256},
    "scan": {"theta0": 30.0, "phi0": 0.0, "theta_gamma": [-30.0, 30.0, 5.0], "phi_gamma": [0.0, 360.0, 15.0]},
    "output": "out",
    "seed": 0,
}

# keys whose values may be null
_NULLABLE = {("reference", "radius"), ("reference", "path")}
_CHOICES = {
    ("mask", "shape"): ("rectangle", "ellipse"),
    ("reference", "kind"): ("uniform", "cosine-taper", "file"),
    ("element", "kind"): ("isotropic", "cosine"),
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, update: dict, path: tuple = ()) -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        where = ".".join(path + (str(key),))
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where!r} must be a mapping")
            out[key] = _merge(base[key], value, path + (key,))
        else:
            out[key] = value
    return out


def _check(cfg: dict, template: dict, path: tuple = ()) -> None:
    for key, default in template.items():
        value = cfg[key]
        here = path + (key,)
        where = ".".join(here)
        if isinstance(default, dict):
            _check(value, default, here)
            continue
        if value is None:
            if here not in _NULLABLE:
                raise ConfigError(f"config key {where!r} may not be null")
            continue
        if here in _CHOICES and value not in _CHOICES[here]:
            raise ConfigError(f"config key {where!r} must be one of {_CHOICES[here]}, got {value!r}")
        if isinstance(default, bool) or isinstance(default, str):
            if not isinstance(value, str):
                raise ConfigError(f"config key {where!r} must be a string")
        elif isinstance(default, int):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"config key {where!r} must be an integer")
        elif isinstance(default, float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"config key {where!r} must be a number")
        elif isinstance(default, list):
            if not isinstance(value, list) or len(value) != len(default):
                raise ConfigError(f"config key {where!r} must be a list of {len(default)} numbers")
            if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in value):
                raise ConfigError(f"config key {where!r} must be a list of numbers")


@dataclass(frozen=True)
class RunConfig:
    data: dict

    @classmethod
    def from_dict(cls, raw: dict | None) -> "RunConfig":
        raw = raw or {}
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping")
        version = raw.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
        cfg = _merge(DEFAULTS, raw)
        _check(cfg, DEFAULTS)
        if cfg["aperture"]["rings"] < 1:
            raise ConfigError("aperture.rings must be >= 1")
        if cfg["aperture"]["cell_side"] <= 0:
            raise ConfigError("aperture.cell_side must be positive")
        if cfg["grid"] < 2:
            raise ConfigError("grid must be >= 2")
        if cfg["reference"]["kind"] == "file" and not cfg["reference"]["path"]:
            raise ConfigError("reference.path is required when reference.kind is 'file'")
        return cls(cfg)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            raw = yaml.safe_load(Path(path).read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror}") from None
        return cls.from_dict(raw)

    def override(self, dotted: dict[str, Any]) -> "RunConfig":
        """New config with ``{"a.b": value}`` entries applied."""
        raw = copy.deepcopy(self.data)
        for key, value in dotted.items():
            node = raw
            parts = key.split(".")
            for p in parts[:-1]:
                if p not in node or not isinstance(node[p], dict):
                    raise ConfigError(f"unknown config key {key!r}")
                node = node[p]
            if parts[-1] not in node:
                raise ConfigError(f"unknown config key {key!r}")
            node[parts[-1]] = value
        return RunConfig.from_dict(raw)

    def __getitem__(self, key):
        return self.data[key]

    def hash(self) -> str:
        """Digest of everything that affects results (the output folder does not)."""
        core = {k: v for k, v in self.data.items() if k != "output"}
        text = json.dumps(core, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def dump(self) -> str:
        return yaml.safe_dump(self.data, sort_keys=False)


def parse_value(text: str) -> Any:
    """Interpret a command-line override with YAML scalar rules."""
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError:
        return text
