"""Dense float64 primitives with analytic vector-Jacobian products.

Every reduction here runs in a fixed order so that repeated runs, and the
loop-based oracles in the test suite, agree bit for bit. Training may opt out
of the ordered matmul with :func:`fast_matmul`.
"""

import math
from contextlib import contextmanager

import numpy as np

import config
from core.errors import DimensionError

Tensor = np.ndarray

GELU_C = math.sqrt(2.0 / math.pi)
GELU_A = 0.044715

_ordered_matmul = True


def as_tensor(x) -> Tensor:
    """Return *x* as a float64 ndarray (no copy when already one)."""
    return np.asarray(x, dtype=np.float64)


@contextmanager
def fast_matmul():
    """Route :func:`matmul` through ``np.matmul`` inside the block.

    Results stay deterministic for a fixed machine and thread count but are no
    longer bit-identical to the loop oracles. Not for use in verification code.
    """
    global _ordered_matmul
    previous = _ordered_matmul
    _ordered_matmul = False
    try:
        yield
    finally:
        _ordered_matmul = previous


def ordered_matmul_enabled() -> bool:
    return _ordered_matmul


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product with left-to-right accumulation over the inner axis.

    Leading batch axes are allowed as long as both operands share them.
    The result equals ``s = 0; for p: s += a[i, p] * b[p, j]`` exactly.

    Args:
        a: Array of shape (..., m, k).
        b: Array of shape (..., k, n).

    Returns:
        Array of shape (..., m, n).

    Raises:
        DimensionError: If the inner or batch extents disagree.
    """
    a = as_tensor(a)
    b = as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2] or a.shape[:-2] != b.shape[:-2]:
        raise DimensionError("matmul operands do not align", a.shape, b.shape)

    if not _ordered_matmul:
        return np.matmul(a, b)
    out = np.zeros(a.shape[:-1] + (b.shape[-1],))
    for p in range(a.shape[-1]):
        out += a[..., :, p, None] * b[..., None, p, :]
    return out


def matmul_backward(a: Tensor, b: Tensor, grad: Tensor) -> tuple[Tensor, Tensor]:
    """Gradients of ``matmul(a, b)`` with respect to both operands."""
    grad = as_tensor(grad)
    expected = a.shape[:-1] + (b.shape[-1],)
    if grad.shape != expected:
        raise DimensionError("matmul upstream gradient has the wrong shape", grad.shape, expected)
    grad_a = matmul(grad, np.swapaxes(b, -1, -2))
    grad_b = matmul(np.swapaxes(a, -1, -2), grad)
    return grad_a, grad_b


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax along *axis* (max subtraction)."""
    x = as_tensor(x)
    if x.shape[axis] == 0:
        raise DimensionError("softmax over an empty axis", x.shape)
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def softmax_row(x: Tensor) -> Tensor:
    """Softmax of a single vector."""
    x = as_tensor(x)
    if x.ndim != 1:
        raise DimensionError("softmax_row expects a vector", x.shape)
    return softmax(x)


def softmax_backward(y: Tensor, grad: Tensor, axis: int = -1) -> Tensor:
    """VJP of softmax given its output *y*."""
    grad = as_tensor(grad)
    if grad.shape != y.shape:
        raise DimensionError("softmax upstream gradient has the wrong shape", grad.shape, y.shape)
    inner = np.sum(grad * y, axis=axis, keepdims=True)
    return y * (grad - inner)


def gelu(x: Tensor) -> Tensor:
    """GELU, tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))."""
    x = as_tensor(x)
    return 0.5 * x * (1.0 + np.tanh(GELU_C * (x + GELU_A * x ** 3)))


def gelu_backward(x: Tensor, grad: Tensor) -> Tensor:
    x = as_tensor(x)
    grad = as_tensor(grad)
    if grad.shape != x.shape:
        raise DimensionError("gelu upstream gradient has the wrong shape", grad.shape, x.shape)
    t = np.tanh(GELU_C * (x + GELU_A * x ** 3))
    du = GELU_C * (1.0 + 3.0 * GELU_A * x ** 2)
    return grad * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)


def layernorm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    eps: float = config.LAYERNORM_EPS,
) -> Tensor:
    """Normalize over the last axis, then apply the affine ``gamma * xhat + beta``.

    Args:
        x: Array of shape (..., n).
        gamma: Scale, shape (n,).
        beta: Shift, shape (n,).
        eps: Added to the variance before the square root.

    Returns:
        Array with the shape of *x*.
    """
    x = as_tensor(x)
    n = x.shape[-1]
    if n < 1 or gamma.shape != (n,) or beta.shape != (n,):
        raise DimensionError("layernorm parameters do not match the feature axis", x.shape, gamma.shape)
    xhat, _ = _normalize(x, eps)
    return gamma * xhat + beta


def layernorm_backward(
    x: Tensor,
    gamma: Tensor,
    grad: Tensor,
    eps: float = config.LAYERNORM_EPS,
) -> tuple[Tensor, Tensor, Tensor]:
    """VJP of :func:`layernorm`.

    Returns:
        (grad_x, grad_gamma, grad_beta); parameter gradients are summed over
        every leading axis.
    """
    x = as_tensor(x)
    grad = as_tensor(grad)
    if grad.shape != x.shape:
        raise DimensionError("layernorm upstream gradient has the wrong shape", grad.shape, x.shape)
    n = x.shape[-1]
    xhat, inv_std = _normalize(x, eps)

    lead = tuple(range(x.ndim - 1))
    grad_gamma = np.sum(grad * xhat, axis=lead)
    grad_beta = np.sum(grad, axis=lead)

    gxhat = grad * gamma
    grad_x = (inv_std / n) * (
        n * gxhat
        - np.sum(gxhat, axis=-1, keepdims=True)
        - xhat * np.sum(gxhat * xhat, axis=-1, keepdims=True)
    )
    return grad_x, grad_gamma, grad_beta


def _normalize(x: Tensor, eps: float) -> tuple[Tensor, Tensor]:
    mu = np.mean(x, axis=-1, keepdims=True)
    centered = x - mu
    var = np.mean(centered * centered, axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    return centered * inv_std, inv_std
