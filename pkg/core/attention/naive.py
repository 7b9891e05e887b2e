"""Loop-based reference implementations.

Each query is handled on its own, windows come from :func:`sample_window`,
and every inner product goes through :func:`_dot`, which also tallies
multiply-accumulates into an optional :class:`MacCounter`. Nothing here is
shared with the vectorized kernels beyond the primitive ops.
"""

import math
from dataclasses import dataclass

import numpy as np

from core.attention.config import EmimConfig
from core.attention.params import AttentionParams, EmimParams, MotionMlpParams
from core.attention.sampling import sample_window
from core.attention.volume import AffinityField, TokenVolume
from core.tensor.linear import LinearParams
from core.tensor.ops import Tensor, gelu, softmax_row


@dataclass
class MacCounter:
    """Multiply-accumulates executed, by stage."""
    projection: int = 0
    affinity: int = 0
    aggregation: int = 0
    motion: int = 0

    @property
    def total(self) -> int:
        return self.projection + self.affinity + self.aggregation + self.motion


def _dot(a: Tensor, b: Tensor, counter: MacCounter | None, stage: str) -> float:
    if counter is not None:
        setattr(counter, stage, getattr(counter, stage) + len(a))
    return float(np.dot(a, b))


def _linear_row(row: Tensor, p: LinearParams, counter: MacCounter | None, stage: str) -> Tensor:
    return np.array([_dot(p.weight[o], row, counter, stage) + p.bias[o] for o in range(p.out_dim)])


def naive_project(values: Tensor, p: LinearParams, counter: MacCounter | None = None) -> Tensor:
    t_extent, h, w, _ = values.shape
    out = np.empty((t_extent, h, w, p.out_dim))
    for t in range(t_extent):
        for x in range(h):
            for y in range(w):
                out[t, x, y] = _linear_row(values[t, x, y], p, counter, "projection")
    return out


def naive_motion_row(row: Tensor, p: MotionMlpParams, counter: MacCounter | None = None) -> Tensor:
    hidden = gelu(_linear_row(row, p.fc1, counter, "motion"))
    return _linear_row(hidden, p.fc2, counter, "motion")


def naive_affinity(
    q: TokenVolume,
    k: TokenVolume,
    bias_table: Tensor,
    cfg: EmimConfig,
    counter: MacCounter | None = None,
) -> AffinityField:
    """Raw affinity built query by query from explicitly sampled key windows."""
    t_extent, h, w, c = q.shape
    head_dim = c // cfg.heads
    scale = math.sqrt(head_dim)
    bias = bias_table.reshape(cfg.heads, -1)
    field = np.empty((cfg.heads, t_extent, h, w, cfg.window_area))
    for t in range(t_extent):
        for x in range(h):
            for y in range(w):
                window = sample_window(k, t, x, y, cfg)
                for head in range(cfg.heads):
                    sl = slice(head * head_dim, (head + 1) * head_dim)
                    query = q.values[t, x, y, sl]
                    for slot in range(cfg.window_area):
                        score = _dot(query, window[slot, sl], counter, "affinity") / scale
                        if cfg.bias_enabled:
                            score += bias[head, slot]
                        field[head, t, x, y, slot] = score
    return AffinityField(field, normalized=False, cfg=cfg)


def naive_emim_forward(
    x: TokenVolume,
    params: EmimParams,
    cfg: EmimConfig,
    counter: MacCounter | None = None,
) -> TokenVolume:
    """Reference for both sliding and non-sliding sampling."""
    values = x.values
    cfg.validate_for(values.shape)
    params.check(cfg)
    att = params.attention
    q = TokenVolume(naive_project(values, att.q, counter))
    k = TokenVolume(naive_project(values, att.k, counter))
    v = TokenVolume(naive_project(values, att.v, counter))

    raw = naive_affinity(q, k, params.bias.table, cfg, counter).values
    t_extent, h, w, c = values.shape
    head_dim = c // cfg.heads
    combined = np.zeros_like(values)
    for t in range(t_extent):
        for xi in range(h):
            for yi in range(w):
                window = sample_window(v, t, xi, yi, cfg)
                for head in range(cfg.heads):
                    sl = slice(head * head_dim, (head + 1) * head_dim)
                    row = raw[head, t, xi, yi]
                    probs = softmax_row(row)
                    feature = np.zeros(head_dim)
                    for slot in range(cfg.window_area):
                        feature += probs[slot] * window[slot, sl]
                        if counter is not None:
                            counter.aggregation += head_dim
                    combined[t, xi, yi, sl] = feature + naive_motion_row(row, params.motion, counter)
    return TokenVolume(naive_project(combined, att.o, counter))


def naive_global_context(
    q: Tensor,
    k: Tensor,
    v: Tensor,
    heads: int,
    counter: MacCounter | None = None,
) -> Tensor:
    """Dense N x N attention, one query row at a time."""
    shape = q.shape
    c = shape[-1]
    head_dim = c // heads
    qf, kf, vf = (t.reshape(-1, c) for t in (q, k, v))
    n = qf.shape[0]
    out = np.zeros((n, c))
    for head in range(heads):
        sl = slice(head * head_dim, (head + 1) * head_dim)
        for i in range(n):
            scores = np.array([_dot(qf[i, sl], kf[j, sl], counter, "affinity") for j in range(n)])
            probs = softmax_row(scores / math.sqrt(head_dim))
            for j in range(n):
                out[i, sl] += probs[j] * vf[j, sl]
                if counter is not None:
                    counter.aggregation += head_dim
    return out.reshape(shape)


def naive_global_forward(
    x: TokenVolume,
    params: AttentionParams,
    heads: int,
    counter: MacCounter | None = None,
) -> TokenVolume:
    values = x.values
    q = naive_project(values, params.q, counter)
    k = naive_project(values, params.k, counter)
    v = naive_project(values, params.v, counter)
    combined = naive_global_context(q, k, v, heads, counter)
    return TokenVolume(naive_project(combined, params.o, counter))


def naive_cost_volume_forward(
    x: TokenVolume,
    params: EmimParams,
    cfg: EmimConfig,
    counter: MacCounter | None = None,
) -> TokenVolume:
    values = x.values
    cfg.validate_for(values.shape)
    params.check(cfg)
    att = params.attention
    q = naive_project(values, att.q, counter)
    k = naive_project(values, att.k, counter)
    v = naive_project(values, att.v, counter)
    combined = naive_global_context(q, k, v, cfg.heads, counter)

    raw = naive_affinity(TokenVolume(q), TokenVolume(k), params.bias.table, cfg, counter).values
    head_dim = values.shape[-1] // cfg.heads
    t_extent, h, w, _ = values.shape
    for t in range(t_extent):
        for xi in range(h):
            for yi in range(w):
                for head in range(cfg.heads):
                    sl = slice(head * head_dim, (head + 1) * head_dim)
                    combined[t, xi, yi, sl] += naive_motion_row(raw[head, t, xi, yi], params.motion, counter)
    return TokenVolume(naive_project(combined, att.o, counter))
