"""Learnable parameters of the attention variants."""

from dataclasses import dataclass

import numpy as np

from core.attention.config import EmimConfig
from core.attention.volume import RelPosBias
from core.errors import ConfigurationError
from core.tensor.linear import LinearParams
from core.tensor.ops import Tensor


@dataclass
class AttentionParams:
    """Per-token Q/K/V projections and the output projection."""
    q: LinearParams
    k: LinearParams
    v: LinearParams
    o: LinearParams

    @classmethod
    def init(cls, channels: int, rng: np.random.Generator) -> "AttentionParams":
        return cls(*(LinearParams.init(channels, channels, rng) for _ in range(4)))

    @classmethod
    def identity(cls, channels: int) -> "AttentionParams":
        return cls(*(LinearParams.identity(channels) for _ in range(4)))

    @property
    def channels(self) -> int:
        return self.q.in_dim

    def named(self, prefix: str) -> dict[str, Tensor]:
        named = {}
        for name in ("q", "k", "v", "o"):
            named.update(getattr(self, name).named(f"{prefix}.{name}"))
        return named


@dataclass
class MotionMlpParams:
    """Two-layer map from a flattened affinity row to a per-head feature.

    fc1: (2P+1)^2 -> 4 (2P+1)^2, fc2: 4 (2P+1)^2 -> d_head, shared by all heads.
    """
    fc1: LinearParams
    fc2: LinearParams

    @classmethod
    def init(cls, cfg: EmimConfig, head_dim: int, rng: np.random.Generator) -> "MotionMlpParams":
        area = cfg.window_area
        return cls(LinearParams.init(area, 4 * area, rng), LinearParams.init(4 * area, head_dim, rng))

    @classmethod
    def zeros(cls, cfg: EmimConfig, head_dim: int) -> "MotionMlpParams":
        area = cfg.window_area
        return cls(LinearParams.zeros(area, 4 * area), LinearParams.zeros(4 * area, head_dim))

    def check(self, cfg: EmimConfig, head_dim: int) -> None:
        area = cfg.window_area
        if (self.fc1.in_dim, self.fc1.out_dim) != (area, 4 * area) or self.fc2.in_dim != 4 * area:
            raise ConfigurationError(
                f"motion MLP extents {self.fc1.weight.shape}/{self.fc2.weight.shape} "
                f"do not fit a window of {area} slots"
            )
        if self.fc2.out_dim != head_dim:
            raise ConfigurationError(f"motion MLP emits {self.fc2.out_dim} channels, heads need {head_dim}")

    def is_zero(self) -> bool:
        return not any(np.any(t) for t in self.named("m").values())

    def named(self, prefix: str) -> dict[str, Tensor]:
        return {**self.fc1.named(f"{prefix}.fc1"), **self.fc2.named(f"{prefix}.fc2")}


@dataclass
class EmimParams:
    """Projections, relative positional bias and motion MLP of one EMIM module."""
    attention: AttentionParams
    bias: RelPosBias
    motion: MotionMlpParams

    @classmethod
    def init(cls, channels: int, cfg: EmimConfig, rng: np.random.Generator) -> "EmimParams":
        head_dim = channels // cfg.heads
        attention = AttentionParams.init(channels, rng)
        bias = RelPosBias(0.02 * rng.standard_normal((cfg.heads, cfg.window, cfg.window)))
        return cls(attention, bias, MotionMlpParams.init(cfg, head_dim, rng))

    @property
    def channels(self) -> int:
        return self.attention.channels

    def check(self, cfg: EmimConfig) -> None:
        if self.channels % cfg.heads:
            raise ConfigurationError(f"{self.channels} channels are not divisible by {cfg.heads} heads")
        self.bias.check(cfg)
        self.motion.check(cfg, self.channels // cfg.heads)

    def without_motion(self, cfg: EmimConfig) -> "EmimParams":
        """Copy whose motion MLP is all zeros (the appearance-only ablation)."""
        return EmimParams(self.attention, self.bias, MotionMlpParams.zeros(cfg, self.channels // cfg.heads))

    def named(self, prefix: str) -> dict[str, Tensor]:
        return {
            **self.attention.named(prefix),
            f"{prefix}.bias": self.bias.table,
            **self.motion.named(f"{prefix}.motion"),
        }
