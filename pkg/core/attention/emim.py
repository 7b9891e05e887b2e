"""Explicit motion information mining attention.

One affinity field per query window serves two consumers:

* softmax-normalized, it aggregates the value window into an appearance
  feature F;
* raw (bias included, before softmax), each row goes through the motion MLP
  and becomes a motion feature M.

The block output is ``o(F + M)``. Shapes follow the (heads, T, H, W, ...)
layout produced by :func:`split_heads`.
"""

import math
from dataclasses import dataclass

import numpy as np

from core.attention.config import EmimConfig
from core.attention.params import EmimParams, MotionMlpParams
from core.attention.projections import project_qkv, project_qkv_backward
from core.attention.sampling import gather_windows, scatter_windows
from core.attention.volume import AffinityField, RelPosBias, TokenVolume, merge_heads, split_heads
from core.errors import ConfigurationError, DimensionError, StateError, error_context
from core.tensor.linear import linear_backward, linear_forward
from core.tensor.ops import Tensor, as_tensor, gelu, gelu_backward, softmax, softmax_backward


def build_affinity(q: TokenVolume, k: TokenVolume, bias: RelPosBias, cfg: EmimConfig) -> AffinityField:
    """Raw windowed affinity ``<q, k_window> / sqrt(d_head) + B``.

    The bias is added at padded slots too, and skipped entirely when
    ``cfg.bias_enabled`` is false.

    Raises:
        DimensionError: If q and k differ in shape.
        ConfigurationError: If the window or bias table does not fit.
    """
    if q.shape != k.shape:
        raise DimensionError("query and key volumes differ", q.shape, k.shape)
    cfg.validate_for(q.shape)
    bias.check(cfg)
    qh = split_heads(q.values, cfg.heads)
    kwh = split_heads(gather_windows(k.values, cfg), cfg.heads)
    return AffinityField(window_scores(qh, kwh, bias, cfg), normalized=False, cfg=cfg)


def normalize_affinity(a: AffinityField) -> AffinityField:
    if a.normalized:
        raise ConfigurationError("affinity field is already normalized")
    return AffinityField(softmax(a.values, axis=-1), normalized=True, cfg=a.cfg)


def aggregate_context(a_norm: AffinityField, v: TokenVolume, cfg: EmimConfig) -> TokenVolume:
    """Weighted sum of each query's value window, heads re-concatenated.

    Raises:
        ConfigurationError: If the field is raw or was built under another config.
    """
    if not a_norm.normalized:
        raise ConfigurationError("contextual aggregation needs a normalized affinity field")
    if a_norm.cfg is not None and a_norm.cfg != cfg:
        raise ConfigurationError("affinity field was built with a different sampling config")
    if a_norm.values.shape[:4] != (cfg.heads,) + v.shape[:3] or a_norm.window_area != cfg.window_area:
        raise DimensionError("affinity field does not match the value volume", a_norm.values.shape, v.shape)
    cfg.validate_for(v.shape)
    vwh = split_heads(gather_windows(v.values, cfg), cfg.heads)
    return TokenVolume(merge_heads(weighted_window_sum(a_norm.values, vwh)))


def motion_transform(a_raw: AffinityField, p: MotionMlpParams) -> TokenVolume:
    """``fc2(gelu(fc1(row)))`` for every raw affinity row, heads concatenated."""
    if a_raw.normalized:
        raise ConfigurationError("the motion path reads the raw affinity, not the normalized one")
    if p.fc1.in_dim != a_raw.window_area:
        raise ConfigurationError(
            f"motion MLP expects rows of {p.fc1.in_dim} slots, affinity has {a_raw.window_area}"
        )
    _, _, out = motion_rows(a_raw.rows(), p)
    heads_first = out.reshape(a_raw.values.shape[:-1] + (p.fc2.out_dim,))
    return TokenVolume(merge_heads(heads_first))


def combine_features(f: TokenVolume, m: TokenVolume) -> TokenVolume:
    if f.shape != m.shape:
        raise DimensionError("appearance and motion features differ", f.shape, m.shape)
    return TokenVolume(f.values + m.values)


@dataclass
class EmimCache:
    """Activations saved by one forward pass for its backward pass."""
    cfg: EmimConfig
    params: EmimParams
    x: Tensor
    qh: Tensor
    kwh: Tensor
    vwh: Tensor
    a_raw: Tensor
    a_norm: Tensor
    hidden_pre: Tensor
    hidden_act: Tensor
    combined: Tensor


def emim_forward(x: TokenVolume, params: EmimParams, cfg: EmimConfig, return_cache: bool = False):
    """Project, build the affinity once, aggregate and transform it, combine, project out.

    Args:
        x: Input token volume (T, H, W, C).
        params: Projections, bias table and motion MLP.
        cfg: Window and sampling configuration.
        return_cache: Also return the activations :func:`emim_backward` needs.

    Returns:
        The output TokenVolume, or ``(output, EmimCache)`` when *return_cache*.
    """
    x = _as_volume(x)
    with error_context("emim_forward"):
        cfg.validate_for(x.shape)
        params.check(cfg)
        out, cache = _emim(x.values, params, cfg)
    return (out, cache) if return_cache else out


def nonsliding_forward(x: TokenVolume, params: EmimParams, cfg: EmimConfig, return_cache: bool = False):
    """Same pipeline with one center-anchored window shared by every query."""
    if cfg.sampling != "non_sliding":
        raise ConfigurationError(f"nonsliding_forward needs sampling=non_sliding, got {cfg.sampling}")
    return emim_forward(x, params, cfg, return_cache=return_cache)


def appearance_forward(x: TokenVolume, params: EmimParams, cfg: EmimConfig) -> TokenVolume:
    """Windowed attention with the motion feature discarded: ``o(F)``."""
    x = _as_volume(x)
    with error_context("appearance_forward"):
        cfg.validate_for(x.shape)
        params.check(cfg)
        att = params.attention
        q = TokenVolume(linear_forward(x.values, att.q))
        k = TokenVolume(linear_forward(x.values, att.k))
        v = TokenVolume(linear_forward(x.values, att.v))
        a_norm = normalize_affinity(build_affinity(q, k, params.bias, cfg))
        f = aggregate_context(a_norm, v, cfg)
        return TokenVolume(linear_forward(f.values, att.o))


def emim_backward(upstream, cache: EmimCache | None) -> tuple[Tensor, EmimParams]:
    """Gradients of the module with respect to its input and every parameter.

    Raises:
        StateError: If no saved activations are supplied.
    """
    if cache is None:
        raise StateError("emim_backward needs the activations saved by emim_forward(return_cache=True)")
    grad = as_tensor(upstream.values if isinstance(upstream, TokenVolume) else upstream)
    if grad.shape != cache.x.shape:
        raise DimensionError("emim upstream gradient has the wrong shape", grad.shape, cache.x.shape)

    att = cache.params.attention
    g_combined, g_o = linear_backward(cache.combined, att.o, grad)
    g_heads = split_heads(g_combined, cache.cfg.heads)

    rows = cache.a_raw.reshape(-1, cache.cfg.window_area)
    g_rows, g_motion = motion_rows_backward(
        rows, cache.hidden_pre, cache.hidden_act, cache.params.motion, g_heads.reshape(-1, g_heads.shape[-1])
    )
    g_raw = g_rows.reshape(cache.a_raw.shape)
    g_raw += _aggregate_backward_affinity(cache, g_heads)
    g_vwh = cache.a_norm[..., None] * g_heads[..., None, :]
    g_q, g_kwh, g_bias = window_scores_backward(cache.qh, cache.kwh, g_raw, cache.cfg)

    g_k = scatter_windows(merge_heads(g_kwh), cache.x.shape, cache.cfg)
    g_v = scatter_windows(merge_heads(g_vwh), cache.x.shape, cache.cfg)
    grad_x, grads = project_qkv_backward(cache.x, att, g_q, g_k, g_v, g_o)
    return grad_x, EmimParams(grads, RelPosBias(g_bias), g_motion)


# ── Shared kernels ─────────────────────────────────────────────────────────


def _as_volume(x) -> TokenVolume:
    return x if isinstance(x, TokenVolume) else TokenVolume(x)


def window_scores(qh: Tensor, kwh: Tensor, bias: RelPosBias, cfg: EmimConfig) -> Tensor:
    head_dim = qh.shape[-1]
    raw = np.sum(qh[..., None, :] * kwh, axis=-1) / math.sqrt(head_dim)
    if cfg.bias_enabled:
        raw = raw + bias.flat()[:, None, None, None, :]
    return raw


def weighted_window_sum(a_norm: Tensor, vwh: Tensor) -> Tensor:
    return np.sum(a_norm[..., None] * vwh, axis=-2)


def motion_rows(rows: Tensor, p: MotionMlpParams) -> tuple[Tensor, Tensor, Tensor]:
    hidden_pre = linear_forward(rows, p.fc1)
    hidden_act = gelu(hidden_pre)
    return hidden_pre, hidden_act, linear_forward(hidden_act, p.fc2)


def _emim(x: Tensor, params: EmimParams, cfg: EmimConfig) -> tuple[TokenVolume, EmimCache]:
    q, k, v = project_qkv(x, params.attention)
    qh = split_heads(q, cfg.heads)
    kwh = split_heads(gather_windows(k, cfg), cfg.heads)
    vwh = split_heads(gather_windows(v, cfg), cfg.heads)

    a_raw = window_scores(qh, kwh, params.bias, cfg)
    a_norm = softmax(a_raw, axis=-1)
    appearance = weighted_window_sum(a_norm, vwh)

    hidden_pre, hidden_act, motion = motion_rows(a_raw.reshape(-1, cfg.window_area), params.motion)
    motion = motion.reshape(appearance.shape)

    combined = merge_heads(appearance + motion)
    out = linear_forward(combined, params.attention.o)
    cache = EmimCache(cfg, params, x, qh, kwh, vwh, a_raw, a_norm, hidden_pre, hidden_act, combined)
    return TokenVolume(out), cache


def motion_rows_backward(
    rows: Tensor, hidden_pre: Tensor, hidden_act: Tensor, p: MotionMlpParams, g_out: Tensor
) -> tuple[Tensor, MotionMlpParams]:
    g_act, g_fc2 = linear_backward(hidden_act, p.fc2, g_out)
    g_pre = gelu_backward(hidden_pre, g_act)
    g_rows, g_fc1 = linear_backward(rows, p.fc1, g_pre)
    return g_rows, MotionMlpParams(g_fc1, g_fc2)


def _aggregate_backward_affinity(cache: EmimCache, g_heads: Tensor) -> Tensor:
    g_norm = np.sum(g_heads[..., None, :] * cache.vwh, axis=-1)
    return softmax_backward(cache.a_norm, g_norm)


def window_scores_backward(qh: Tensor, kwh: Tensor, g_raw: Tensor, cfg: EmimConfig) -> tuple[Tensor, Tensor, Tensor]:
    """Gradients of the raw affinity w.r.t. q (merged heads), key windows and bias."""
    scale = 1.0 / math.sqrt(qh.shape[-1])
    g_qh = np.sum(g_raw[..., None] * kwh, axis=-2) * scale
    g_kwh = g_raw[..., None] * qh[..., None, :] * scale
    if cfg.bias_enabled:
        g_bias = np.sum(g_raw, axis=(1, 2, 3)).reshape(cfg.heads, cfg.window, cfg.window)
    else:
        g_bias = np.zeros((cfg.heads, cfg.window, cfg.window))
    return merge_heads(g_qh), g_kwh, g_bias
