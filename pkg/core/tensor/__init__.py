"""Dense tensor primitives."""

from core.tensor.ops import (
    Tensor,
    as_tensor,
    fast_matmul,
    gelu,
    gelu_backward,
    layernorm,
    layernorm_backward,
    matmul,
    matmul_backward,
    softmax,
    softmax_backward,
    softmax_row,
)
from core.tensor.linear import LinearParams, linear_backward, linear_forward
from core.tensor.fixtures import read_tensor, write_tensor

__all__ = [
    "Tensor",
    "as_tensor",
    "fast_matmul",
    "gelu",
    "gelu_backward",
    "layernorm",
    "layernorm_backward",
    "matmul",
    "matmul_backward",
    "softmax",
    "softmax_backward",
    "softmax_row",
    "LinearParams",
    "linear_backward",
    "linear_forward",
    "read_tensor",
    "write_tensor",
]
