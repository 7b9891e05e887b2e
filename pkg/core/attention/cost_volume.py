"""Cost volume bolted onto unmodified self-attention.

Appearance comes from full global attention; a separate windowed cost volume
over the same queries and keys feeds the motion MLP. The two features are
summed before the output projection. This is the "traditional" way of adding
motion cues to a transformer, kept as a baseline for the unified module.
"""

from dataclasses import dataclass

from core.attention.config import EmimConfig
from core.attention.emim import motion_rows, motion_rows_backward, window_scores, window_scores_backward
from core.attention.global_attention import global_context, global_context_backward
from core.attention.params import EmimParams
from core.attention.projections import project_qkv, project_qkv_backward
from core.attention.sampling import gather_windows, scatter_windows
from core.attention.volume import RelPosBias, TokenVolume, merge_heads, split_heads
from core.errors import DimensionError, StateError, error_context
from core.tensor.linear import linear_backward, linear_forward
from core.tensor.ops import Tensor, as_tensor


@dataclass
class CostVolumeCache:
    cfg: EmimConfig
    params: EmimParams
    x: Tensor
    global_saved: tuple
    qh: Tensor
    kwh: Tensor
    a_raw: Tensor
    hidden_pre: Tensor
    hidden_act: Tensor
    combined: Tensor


def cost_volume_forward(x: TokenVolume, params: EmimParams, cfg: EmimConfig, return_cache: bool = False):
    x = x if isinstance(x, TokenVolume) else TokenVolume(x)
    with error_context("cost_volume_forward"):
        cfg.validate_for(x.shape)
        params.check(cfg)
        q, k, v = project_qkv(x.values, params.attention)
        appearance, global_saved = global_context(q, k, v, cfg.heads)

        qh = split_heads(q, cfg.heads)
        kwh = split_heads(gather_windows(k, cfg), cfg.heads)
        a_raw = window_scores(qh, kwh, params.bias, cfg)
        hidden_pre, hidden_act, motion = motion_rows(a_raw.reshape(-1, cfg.window_area), params.motion)
        motion = merge_heads(motion.reshape(qh.shape))

        combined = appearance + motion
        out = TokenVolume(linear_forward(combined, params.attention.o))
    if not return_cache:
        return out
    cache = CostVolumeCache(cfg, params, x.values, global_saved, qh, kwh, a_raw, hidden_pre, hidden_act, combined)
    return out, cache


def cost_volume_backward(upstream, cache: CostVolumeCache | None) -> tuple[Tensor, EmimParams]:
    if cache is None:
        raise StateError("cost_volume_backward needs the activations saved by the forward pass")
    grad = as_tensor(upstream.values if isinstance(upstream, TokenVolume) else upstream)
    if grad.shape != cache.x.shape:
        raise DimensionError("cost volume upstream gradient has the wrong shape", grad.shape, cache.x.shape)
    cfg = cache.cfg
    att = cache.params.attention

    g_combined, g_o = linear_backward(cache.combined, att.o, grad)
    g_q, g_k, g_v = global_context_backward(cache.global_saved, g_combined)

    g_heads = split_heads(g_combined, cfg.heads)
    rows = cache.a_raw.reshape(-1, cfg.window_area)
    g_rows, g_motion = motion_rows_backward(
        rows, cache.hidden_pre, cache.hidden_act, cache.params.motion, g_heads.reshape(-1, g_heads.shape[-1])
    )
    g_q_window, g_kwh, g_bias = window_scores_backward(cache.qh, cache.kwh, g_rows.reshape(cache.a_raw.shape), cfg)
    g_q = g_q + g_q_window
    g_k = g_k + scatter_windows(merge_heads(g_kwh), cache.x.shape, cfg)

    grad_x, grads = project_qkv_backward(cache.x, att, g_q, g_k, g_v, g_o)
    return grad_x, EmimParams(grads, RelPosBias(g_bias), g_motion)
