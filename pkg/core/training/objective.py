"""Classification loss and the learning-rate schedule."""

import math

import numpy as np

from core.errors import ConfigurationError, DimensionError
from core.tensor.ops import Tensor, as_tensor, softmax


def cross_entropy(logits: Tensor, label: int) -> tuple[float, Tensor]:
    """Softmax cross-entropy of one example and its gradient w.r.t. the logits."""
    logits = as_tensor(logits)
    if logits.ndim != 1:
        raise DimensionError("cross_entropy takes one logit vector", logits.shape)
    if not 0 <= label < logits.shape[0]:
        raise ConfigurationError(f"label {label} outside [0, {logits.shape[0]})")
    shifted = logits - np.max(logits)
    log_norm = math.log(float(np.sum(np.exp(shifted))))
    loss = log_norm - float(shifted[label])
    grad = softmax(logits)
    grad[label] -= 1.0
    return loss, grad


def warmup_steps(total_steps: int, warmup_fraction: float) -> int:
    if not 0.0 <= warmup_fraction < 1.0:
        raise ConfigurationError(f"warmup fraction must lie in [0, 1), got {warmup_fraction}")
    return max(1, math.ceil(total_steps * warmup_fraction)) if warmup_fraction > 0 else 0


def learning_rate(step: int, total_steps: int, base_lr: float, warmup_fraction: float) -> float:
    """Constant rate after a linear ramp over the first ``warmup_fraction`` of steps."""
    warmup = warmup_steps(total_steps, warmup_fraction)
    if step < warmup:
        return base_lr * (step + 1) / warmup
    return base_lr


def sgd_step(params: dict[str, Tensor], grads: dict[str, Tensor], lr: float, frozen: frozenset = frozenset()) -> None:
    """In-place ``p -= lr * g`` for every parameter not in ``frozen``."""
    for name, param in params.items():
        if name in frozen:
            continue
        param -= lr * grads[name]


def clip_grad_norm(grads: dict[str, Tensor], max_norm: float, frozen: frozenset = frozenset()) -> float:
    """Scale trainable gradients in place so their global L2 norm is at most ``max_norm``.

    The norm is accumulated in sorted name order. Returns the norm before clipping.
    """
    if not max_norm > 0:
        raise ConfigurationError(f"max_norm must be positive, got {max_norm}")
    names = sorted(name for name in grads if name not in frozen)
    total = 0.0
    for name in names:
        total += float(np.sum(grads[name] * grads[name]))
    norm = math.sqrt(total)
    if norm > max_norm:
        coef = max_norm / (norm + 1e-6)
        for name in names:
            grads[name] *= coef
    return norm
