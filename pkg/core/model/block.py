"""Pre-norm transformer block with a selectable attention module.

    Y   = SA(LN(Z)) + Z
    out = FFN(LN(Y)) + Y

SA is global self-attention for kind ``O`` and the windowed EMIM module for
kind ``E`` (or the cost-volume baseline when the stack runs that variant).
"""

from dataclasses import dataclass

import numpy as np

from core.attention.config import EmimConfig
from core.attention.cost_volume import cost_volume_backward, cost_volume_forward
from core.attention.emim import emim_backward, emim_forward
from core.attention.global_attention import global_attention_backward, global_attention_forward
from core.attention.params import AttentionParams, EmimParams
from core.attention.volume import TokenVolume
from core.errors import ConfigurationError, StateError
from core.tensor.linear import LinearParams, linear_backward, linear_forward
from core.tensor.ops import Tensor, as_tensor, gelu, gelu_backward, layernorm, layernorm_backward

BLOCK_KINDS = ("O", "E")
E_VARIANTS = ("emim", "cost_volume")


@dataclass
class LayerNormParams:
    gamma: Tensor
    beta: Tensor

    @classmethod
    def init(cls, dim: int) -> "LayerNormParams":
        return cls(np.ones(dim), np.zeros(dim))

    def named(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.gamma": self.gamma, f"{prefix}.beta": self.beta}


@dataclass
class BlockParams:
    kind: str
    norm1: LayerNormParams
    attn: AttentionParams | EmimParams
    norm2: LayerNormParams
    ffn1: LinearParams
    ffn2: LinearParams

    @classmethod
    def init(
        cls,
        kind: str,
        channels: int,
        cfg: EmimConfig,
        rng: np.random.Generator,
        ffn_expansion: int = 4,
    ) -> "BlockParams":
        if kind not in BLOCK_KINDS:
            raise ConfigurationError(f"block kind must be one of {BLOCK_KINDS}, got {kind!r}")
        attn = EmimParams.init(channels, cfg, rng) if kind == "E" else AttentionParams.init(channels, rng)
        hidden = ffn_expansion * channels
        return cls(
            kind,
            LayerNormParams.init(channels),
            attn,
            LayerNormParams.init(channels),
            LinearParams.init(channels, hidden, rng),
            LinearParams.init(hidden, channels, rng),
        )

    def named(self, prefix: str) -> dict[str, Tensor]:
        return {
            **self.norm1.named(f"{prefix}.norm1"),
            **self.attn.named(f"{prefix}.attn"),
            **self.norm2.named(f"{prefix}.norm2"),
            **self.ffn1.named(f"{prefix}.ffn1"),
            **self.ffn2.named(f"{prefix}.ffn2"),
        }


@dataclass
class BlockCache:
    kind: str
    variant: str
    params: BlockParams
    z: Tensor
    attn_cache: object
    y: Tensor
    h2: Tensor
    f1: Tensor
    f1_act: Tensor


def block_forward(
    z: TokenVolume,
    kind: str,
    params: BlockParams,
    cfg: EmimConfig,
    variant: str = "emim",
    return_cache: bool = False,
):
    """Run one block.

    Args:
        z: Input tokens (T, H, W, C).
        kind: ``"O"`` or ``"E"``.
        params: Block parameters; their attention type must match *kind*.
        cfg: Window config; ``cfg.heads`` is also the head count of O blocks.
        variant: Which windowed module an E block runs (``emim`` or ``cost_volume``).

    Raises:
        ConfigurationError: On a kind/params mismatch or unknown variant.
    """
    _check_kind(kind, params, variant)
    z = z if isinstance(z, TokenVolume) else TokenVolume(z)
    zv = z.values

    h1 = TokenVolume(layernorm(zv, params.norm1.gamma, params.norm1.beta))
    if kind == "O":
        attn_out, attn_cache = global_attention_forward(h1, params.attn, cfg.heads, return_cache=True)
    elif variant == "cost_volume":
        attn_out, attn_cache = cost_volume_forward(h1, params.attn, cfg, return_cache=True)
    else:
        attn_out, attn_cache = emim_forward(h1, params.attn, cfg, return_cache=True)
    y = zv + attn_out.values

    h2 = layernorm(y, params.norm2.gamma, params.norm2.beta)
    f1 = linear_forward(h2, params.ffn1)
    f1_act = gelu(f1)
    out = TokenVolume(y + linear_forward(f1_act, params.ffn2))
    if not return_cache:
        return out
    return out, BlockCache(kind, variant, params, zv, attn_cache, y, h2, f1, f1_act)


def block_backward(upstream, cache: BlockCache | None) -> tuple[Tensor, BlockParams]:
    if cache is None:
        raise StateError("block_backward needs the activations saved by block_forward")
    p = cache.params
    g_out = as_tensor(upstream.values if isinstance(upstream, TokenVolume) else upstream)

    g_act, g_ffn2 = linear_backward(cache.f1_act, p.ffn2, g_out)
    g_f1 = gelu_backward(cache.f1, g_act)
    g_h2, g_ffn1 = linear_backward(cache.h2, p.ffn1, g_f1)
    g_y_norm, g_gamma2, g_beta2 = layernorm_backward(cache.y, p.norm2.gamma, g_h2)
    g_y = g_out + g_y_norm

    if cache.kind == "O":
        g_h1, g_attn = global_attention_backward(g_y, cache.attn_cache)
    elif cache.variant == "cost_volume":
        g_h1, g_attn = cost_volume_backward(g_y, cache.attn_cache)
    else:
        g_h1, g_attn = emim_backward(g_y, cache.attn_cache)
    g_z_norm, g_gamma1, g_beta1 = layernorm_backward(cache.z, p.norm1.gamma, g_h1)

    grads = BlockParams(
        cache.kind,
        LayerNormParams(g_gamma1, g_beta1),
        g_attn,
        LayerNormParams(g_gamma2, g_beta2),
        g_ffn1,
        g_ffn2,
    )
    return g_y + g_z_norm, grads


def _check_kind(kind: str, params: BlockParams, variant: str) -> None:
    if kind not in BLOCK_KINDS:
        raise ConfigurationError(f"block kind must be one of {BLOCK_KINDS}, got {kind!r}")
    if variant not in E_VARIANTS:
        raise ConfigurationError(f"unknown E-block variant {variant!r}")
    expected = EmimParams if kind == "E" else AttentionParams
    if kind != params.kind or not isinstance(params.attn, expected):
        raise ConfigurationError(
            f"block kind {kind} does not match parameters of kind {params.kind} "
            f"({type(params.attn).__name__})"
        )
