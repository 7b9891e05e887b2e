"""Full multi-head self-attention over every token of the clip."""

import math
from dataclasses import dataclass

from core.attention.params import AttentionParams
from core.attention.projections import project_qkv, project_qkv_backward
from core.attention.volume import TokenVolume, merge_heads, split_heads
from core.errors import ConfigurationError, DimensionError, StateError, error_context
from core.tensor.linear import linear_backward, linear_forward
from core.tensor.ops import Tensor, as_tensor, matmul, matmul_backward, softmax, softmax_backward


@dataclass
class GlobalCache:
    """Per-head activations of one global attention pass (tokens flattened to N)."""
    heads: int
    params: AttentionParams
    x: Tensor
    qh: Tensor
    kh: Tensor
    vh: Tensor
    probs: Tensor
    combined: Tensor


def global_context(q: Tensor, k: Tensor, v: Tensor, heads: int) -> tuple[Tensor, tuple]:
    """``softmax(q k^T / sqrt(d_head)) v`` per head over N flattened tokens.

    Args:
        q, k, v: Arrays of shape (T, H, W, C).
        heads: Number of heads; must divide C.

    Returns:
        (features of shape (T, H, W, C), saved (qh, kh, vh, probs)).
    """
    shape = q.shape
    c = shape[-1]
    qh, kh, vh = (split_heads(t.reshape(-1, c), heads) for t in (q, k, v))
    scores = matmul(qh, kh.swapaxes(-1, -2)) / math.sqrt(qh.shape[-1])
    probs = softmax(scores, axis=-1)
    features = merge_heads(matmul(probs, vh)).reshape(shape)
    return features, (qh, kh, vh, probs)


def global_context_backward(saved: tuple, grad: Tensor) -> tuple[Tensor, Tensor, Tensor]:
    """VJP of :func:`global_context`; returns gradients for q, k and v."""
    qh, kh, vh, probs = saved
    shape = grad.shape
    g_heads = split_heads(grad.reshape(-1, shape[-1]), qh.shape[0])
    g_probs, g_vh = matmul_backward(probs, vh, g_heads)
    g_scores = softmax_backward(probs, g_probs) / math.sqrt(qh.shape[-1])
    g_qh, g_kh_t = matmul_backward(qh, kh.swapaxes(-1, -2), g_scores)
    g_kh = g_kh_t.swapaxes(-1, -2)
    return tuple(merge_heads(g).reshape(shape) for g in (g_qh, g_kh, g_vh))


def global_attention_forward(x: TokenVolume, params: AttentionParams, heads: int, return_cache: bool = False):
    """Multi-head self-attention with a full N x N affinity, N = T * H * W.

    Returns:
        The output TokenVolume, or ``(output, GlobalCache)`` when *return_cache*.
    """
    x = x if isinstance(x, TokenVolume) else TokenVolume(x)
    with error_context("global_attention_forward"):
        if x.channels != params.channels:
            raise DimensionError("input channels do not match projections", x.shape, params.q.weight.shape)
        if x.channels % heads:
            raise ConfigurationError(f"{x.channels} channels are not divisible by {heads} heads")
        q, k, v = project_qkv(x.values, params)
        combined, (qh, kh, vh, probs) = global_context(q, k, v, heads)
        out = TokenVolume(linear_forward(combined, params.o))
    if not return_cache:
        return out
    return out, GlobalCache(heads, params, x.values, qh, kh, vh, probs, combined)


def global_attention_backward(upstream, cache: GlobalCache | None) -> tuple[Tensor, AttentionParams]:
    """Gradients of global attention with respect to its input and projections."""
    if cache is None:
        raise StateError("global_attention_backward needs the activations saved by the forward pass")
    grad = as_tensor(upstream.values if isinstance(upstream, TokenVolume) else upstream)
    if grad.shape != cache.x.shape:
        raise DimensionError("global attention upstream gradient has the wrong shape", grad.shape, cache.x.shape)
    g_combined, g_o = linear_backward(cache.combined, cache.params.o, grad)
    saved = (cache.qh, cache.kh, cache.vh, cache.probs)
    g_q, g_k, g_v = global_context_backward(saved, g_combined)
    return project_qkv_backward(cache.x, cache.params, g_q, g_k, g_v, g_o)
