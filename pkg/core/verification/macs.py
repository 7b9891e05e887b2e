"""Multiply-accumulate model of one attention forward pass.

Only multiply-accumulates are counted; softmax exponentials, normalization
divides, bias adds and GELU evaluations are not.
"""

from dataclasses import dataclass

import numpy as np

from core.attention.config import EmimConfig
from core.attention.naive import (
    MacCounter,
    naive_cost_volume_forward,
    naive_emim_forward,
    naive_global_forward,
)
from core.attention.params import AttentionParams, EmimParams
from core.attention.volume import TokenVolume
from core.errors import ConfigurationError

MAC_MECHANISMS = ("global", "emim", "non_sliding", "cost_volume")


@dataclass(frozen=True)
class MacModel:
    mechanism: str
    projection: int
    affinity: int
    aggregation: int
    motion: int

    @property
    def total(self) -> int:
        return self.projection + self.affinity + self.aggregation + self.motion

    @property
    def context(self) -> int:
        """Affinity plus aggregation, the part that scales with the candidate set."""
        return self.affinity + self.aggregation

    def as_dict(self) -> dict:
        return {
            "mechanism": self.mechanism,
            "projection": self.projection,
            "affinity": self.affinity,
            "aggregation": self.aggregation,
            "motion": self.motion,
            "total": self.total,
        }


def mac_count(cfg: EmimConfig, mechanism: str, shape: tuple) -> MacModel:
    """Analytic MACs for a (T, H, W, C) input.

    Args:
        cfg: Window config (radius and heads are used).
        mechanism: ``global``, ``emim``, ``non_sliding`` or ``cost_volume``.
        shape: Token volume shape.
    """
    if mechanism not in MAC_MECHANISMS:
        raise ConfigurationError(f"mechanism must be one of {MAC_MECHANISMS}, got {mechanism!r}")
    t_extent, h, w, c = shape
    n = t_extent * h * w
    area = cfg.window_area
    head_dim = c // cfg.heads
    projection = 4 * n * c * c
    motion = n * cfg.heads * (area * 4 * area + 4 * area * head_dim)
    windowed = n * area * c
    dense = n * n * c
    if mechanism == "global":
        return MacModel(mechanism, projection, dense, dense, 0)
    if mechanism == "cost_volume":
        return MacModel(mechanism, projection, dense + windowed, dense, motion)
    return MacModel(mechanism, projection, windowed, windowed, motion)


def instrumented_count(cfg: EmimConfig, mechanism: str, shape: tuple, seed: int = 0) -> MacModel:
    """Run the matching loop oracle on random input and read its counter."""
    if mechanism not in MAC_MECHANISMS:
        raise ConfigurationError(f"mechanism must be one of {MAC_MECHANISMS}, got {mechanism!r}")
    rng = np.random.default_rng(seed)
    x = TokenVolume(rng.standard_normal(shape))
    counter = MacCounter()
    c = shape[-1]
    if mechanism == "global":
        naive_global_forward(x, AttentionParams.init(c, rng), cfg.heads, counter)
    elif mechanism == "cost_volume":
        naive_cost_volume_forward(x, EmimParams.init(c, cfg, rng), cfg, counter)
    else:
        sampling = "non_sliding" if mechanism == "non_sliding" else "sliding"
        run_cfg = cfg.with_overrides(sampling=sampling)
        naive_emim_forward(x, EmimParams.init(c, run_cfg, rng), run_cfg, counter)
    return MacModel(mechanism, counter.projection, counter.affinity, counter.aggregation, counter.motion)


def radius_sweep(cfg: EmimConfig, shape: tuple, radii: list[int], mechanism: str = "emim") -> list[MacModel]:
    """Analytic counts for each radius, everything else held fixed."""
    return [mac_count(cfg.with_overrides(radius=r), mechanism, shape) for r in radii]
