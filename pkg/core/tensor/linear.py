"""Fully connected layer parameters and their forward/backward passes."""

from dataclasses import dataclass

import numpy as np

from core.errors import DimensionError
from core.tensor.ops import Tensor, as_tensor, matmul


@dataclass
class LinearParams:
    """Weight (out_dim x in_dim) and bias (out_dim)."""
    weight: Tensor
    bias: Tensor

    def __post_init__(self):
        self.weight = as_tensor(self.weight)
        self.bias = as_tensor(self.bias)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise DimensionError("linear weight and bias disagree", self.weight.shape, self.bias.shape)

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    @classmethod
    def init(cls, in_dim: int, out_dim: int, rng: np.random.Generator, scale: float = 1.0) -> "LinearParams":
        """Gaussian weights with std ``scale / sqrt(in_dim)``, zero bias."""
        weight = rng.standard_normal((out_dim, in_dim)) * (scale / np.sqrt(in_dim))
        return cls(weight, np.zeros(out_dim))

    @classmethod
    def identity(cls, dim: int) -> "LinearParams":
        return cls(np.eye(dim), np.zeros(dim))

    @classmethod
    def zeros(cls, in_dim: int, out_dim: int) -> "LinearParams":
        return cls(np.zeros((out_dim, in_dim)), np.zeros(out_dim))

    def zeros_like(self) -> "LinearParams":
        return LinearParams(np.zeros_like(self.weight), np.zeros_like(self.bias))

    def named(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.weight": self.weight, f"{prefix}.bias": self.bias}


def linear_forward(x: Tensor, p: LinearParams) -> Tensor:
    """Apply ``x @ W^T + b`` over the last axis of *x*."""
    x = as_tensor(x)
    if x.shape[-1] != p.in_dim:
        raise DimensionError("linear input width does not match weight", x.shape, p.weight.shape)
    flat = x.reshape(-1, p.in_dim)
    out = matmul(flat, p.weight.T) + p.bias
    return out.reshape(x.shape[:-1] + (p.out_dim,))


def linear_backward(x: Tensor, p: LinearParams, grad: Tensor) -> tuple[Tensor, LinearParams]:
    """VJP of :func:`linear_forward`.

    Returns:
        (grad_x, grads) where *grads* mirrors the parameter layout.
    """
    x = as_tensor(x)
    grad = as_tensor(grad)
    expected = x.shape[:-1] + (p.out_dim,)
    if grad.shape != expected:
        raise DimensionError("linear upstream gradient has the wrong shape", grad.shape, expected)
    flat_x = x.reshape(-1, p.in_dim)
    flat_g = grad.reshape(-1, p.out_dim)
    grad_x = matmul(flat_g, p.weight).reshape(x.shape)
    grad_w = matmul(flat_g.T, flat_x)
    grad_b = np.sum(flat_g, axis=0)
    return grad_x, LinearParams(grad_w, grad_b)
