"""Typed access to data/defaults.yaml."""

from dataclasses import dataclass, fields
from functools import lru_cache
from pathlib import Path

import yaml

import config
from core.errors import ConfigurationError


@dataclass(frozen=True)
class MechanismDefaults:
    radius: int
    interval: int
    heads: int
    sampling: str
    boundary: str
    pad_value: float
    bias_enabled: bool
    pattern: str


@dataclass(frozen=True)
class ToyRecipe:
    clips: int
    frames: int
    height: int
    width: int
    classes: int
    speed: int
    patch: int
    depth: int
    channels: int
    heads: int
    radius: int
    interval: int
    pattern: str
    learning_rate: float
    warmup_fraction: float
    batch_size: int
    epochs: int
    clip_norm: float
    fast_matmul: bool


@dataclass(frozen=True)
class BenchDefaults:
    frames: int
    height: int
    width: int
    channels: int
    repeats: int


@dataclass(frozen=True)
class CheckDefaults:
    trials: int
    instrumented_configs: int
    grad_frames: int
    grad_height: int
    grad_width: int
    grad_channels: int


@dataclass(frozen=True)
class DemoDefaults:
    seeds: int
    height: int
    width: int


@dataclass(frozen=True)
class Defaults:
    mechanism: MechanismDefaults
    toy: ToyRecipe
    bench: BenchDefaults
    check: CheckDefaults
    demo: DemoDefaults


def _section(raw: dict, name: str, cls):
    section = raw.get(name)
    if not isinstance(section, dict):
        raise ConfigurationError(f"defaults file has no '{name}' section")
    expected = {f.name for f in fields(cls)}
    missing = expected - set(section)
    unknown = set(section) - expected
    if missing or unknown:
        raise ConfigurationError(
            f"defaults section '{name}': missing {sorted(missing)}, unknown {sorted(unknown)}"
        )
    return cls(**section)


@lru_cache(maxsize=4)
def load_defaults(path: Path = config.DEFAULTS_PATH) -> Defaults:
    """Read and validate the defaults document.

    Raises:
        ConfigurationError: If the file is missing or a section is incomplete.
    """
    try:
        with open(path) as f:
            raw = yaml.safe_load(f) or {}
    except FileNotFoundError as exc:
        raise ConfigurationError(f"defaults file not found: {path}") from exc
    return Defaults(
        mechanism=_section(raw, "mechanism", MechanismDefaults),
        toy=_section(raw, "toy", ToyRecipe),
        bench=_section(raw, "bench", BenchDefaults),
        check=_section(raw, "check", CheckDefaults),
        demo=_section(raw, "demo", DemoDefaults),
    )
