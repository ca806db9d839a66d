"""Config loading and merging.

A single YAML file carries every tunable of the simulator (see
``defaults.yaml``). User files override the defaults section by section;
CLI flags override file values. The resolved dict is hashed so output
files can record exactly which parameter set produced them.
"""

from __future__ import annotations

import hashlib
import importlib.resources
import json
from typing import Any

import yaml


def default_config() -> dict[str, Any]:
    """Return a fresh copy of the packaged default parameter table."""
    text = importlib.resources.files("flashbitops").joinpath("defaults.yaml").read_text()
    return yaml.safe_load(text)


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if key in out and isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path: str | None = None) -> dict[str, Any]:
    """Load the defaults, then merge a user YAML file over them."""
    cfg = default_config()
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            user = yaml.safe_load(fh) or {}
        if not isinstance(user, dict):
            raise ValueError(f"config file {path!r} must contain a mapping")
        cfg = _deep_merge(cfg, user)
    return cfg


def config_hash(cfg: dict[str, Any]) -> str:
    """Stable short hash of a resolved config dict."""
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def save_config(cfg: dict[str, Any], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(cfg, fh, sort_keys=False)
