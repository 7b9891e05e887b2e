"""Token volumes, relative positional bias tables and affinity fields."""

from dataclasses import dataclass

import numpy as np

import config
from core.attention.config import EmimConfig
from core.errors import ConfigurationError, DimensionError
from core.tensor.ops import Tensor, as_tensor


@dataclass
class TokenVolume:
    """Dense (T, H, W, d) field of tokens."""
    values: Tensor

    def __post_init__(self):
        self.values = as_tensor(self.values)
        if self.values.ndim != 4 or min(self.values.shape) < 1:
            raise DimensionError("token volume must be a nonempty (T, H, W, d) array", self.values.shape)

    @property
    def t_extent(self) -> int:
        return self.values.shape[0]

    @property
    def h_extent(self) -> int:
        return self.values.shape[1]

    @property
    def w_extent(self) -> int:
        return self.values.shape[2]

    @property
    def channels(self) -> int:
        return self.values.shape[3]

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def num_tokens(self) -> int:
        return self.t_extent * self.h_extent * self.w_extent


@dataclass
class RelPosBias:
    """Per-head (2P+1) x (2P+1) additive bias, indexed by (dx + P, dy + P)."""
    table: Tensor

    def __post_init__(self):
        self.table = as_tensor(self.table)
        if self.table.ndim != 3 or self.table.shape[1] != self.table.shape[2] or self.table.shape[1] % 2 == 0:
            raise DimensionError("bias table must have shape (heads, 2P+1, 2P+1)", self.table.shape)

    @classmethod
    def zeros(cls, cfg: EmimConfig) -> "RelPosBias":
        return cls(np.zeros((cfg.heads, cfg.window, cfg.window)))

    def check(self, cfg: EmimConfig) -> None:
        if self.table.shape != (cfg.heads, cfg.window, cfg.window):
            raise ConfigurationError(
                f"bias table {self.table.shape} does not match window {cfg.window} with {cfg.heads} heads"
            )

    def flat(self) -> Tensor:
        """(heads, (2P+1)^2) view in window-slot raster order."""
        return self.table.reshape(self.table.shape[0], -1)


@dataclass
class AffinityField:
    """Per-query window scores of shape (heads, T, H, W, (2P+1)^2).

    ``normalized`` distinguishes softmax-normalized rows from raw scores.
    """
    values: Tensor
    normalized: bool = False
    cfg: EmimConfig | None = None

    def __post_init__(self):
        self.values = as_tensor(self.values)
        if self.values.ndim != 5:
            raise DimensionError("affinity field must be (heads, T, H, W, window)", self.values.shape)

    @property
    def window_area(self) -> int:
        return self.values.shape[-1]

    def rows(self) -> Tensor:
        """All window rows stacked as (heads * T * H * W, window)."""
        return self.values.reshape(-1, self.window_area)

    def is_probability_field(self, tol: float = config.NORMALIZATION_TOLERANCE) -> bool:
        sums = np.sum(self.values, axis=-1)
        return bool(np.all(self.values >= 0.0) and np.all(np.abs(sums - 1.0) <= tol))


def split_heads(x: Tensor, heads: int) -> Tensor:
    """(T, H, W, C) -> (heads, T, H, W, C / heads); works for any leading shape."""
    c = x.shape[-1]
    if c % heads:
        raise ConfigurationError(f"{c} channels are not divisible by {heads} heads")
    split = x.reshape(x.shape[:-1] + (heads, c // heads))
    return np.moveaxis(split, -2, 0)


def merge_heads(x: Tensor) -> Tensor:
    """Inverse of :func:`split_heads`."""
    heads = x.shape[0]
    moved = np.moveaxis(x, 0, -2)
    return moved.reshape(moved.shape[:-2] + (heads * moved.shape[-1],))
