"""Q/K/V input projections shared by every attention variant."""

from core.attention.params import AttentionParams
from core.tensor.linear import LinearParams, linear_backward, linear_forward
from core.tensor.ops import Tensor


def project_qkv(x: Tensor, att: AttentionParams) -> tuple[Tensor, Tensor, Tensor]:
    return linear_forward(x, att.q), linear_forward(x, att.k), linear_forward(x, att.v)


def project_qkv_backward(
    x: Tensor,
    att: AttentionParams,
    g_q: Tensor,
    g_k: Tensor,
    g_v: Tensor,
    g_o: LinearParams,
) -> tuple[Tensor, AttentionParams]:
    """Sum the three input-gradient paths and bundle every projection gradient."""
    gx_q, g_wq = linear_backward(x, att.q, g_q)
    gx_k, g_wk = linear_backward(x, att.k, g_k)
    gx_v, g_wv = linear_backward(x, att.v, g_v)
    return gx_q + gx_k + gx_v, AttentionParams(g_wq, g_wk, g_wv, g_o)
