"""Non-overlapping patch embedding (no temporal downsampling)."""

import numpy as np

from core.attention.volume import TokenVolume
from core.errors import ConfigurationError, DimensionError
from core.tensor.linear import LinearParams, linear_backward, linear_forward
from core.tensor.ops import Tensor, as_tensor


def patchify(clip: Tensor, patch: int) -> Tensor:
    """(T, H_px, W_px, ch) -> (T, H_px/patch, W_px/patch, patch*patch*ch).

    Each patch flattens row-major over (row in patch, column in patch, channel).
    """
    clip = as_tensor(clip)
    if clip.ndim != 4:
        raise DimensionError("clip must be (T, H_px, W_px, ch)", clip.shape)
    t_extent, h_px, w_px, ch = clip.shape
    if patch < 1 or h_px % patch or w_px % patch:
        raise ConfigurationError(f"pixel extents {h_px}x{w_px} are not divisible by patch size {patch}")
    h, w = h_px // patch, w_px // patch
    blocks = clip.reshape(t_extent, h, patch, w, patch, ch).transpose(0, 1, 3, 2, 4, 5)
    return np.ascontiguousarray(blocks).reshape(t_extent, h, w, patch * patch * ch)


def patch_embed(clip: Tensor, patch: int, proj: LinearParams) -> TokenVolume:
    return TokenVolume(linear_forward(patchify(clip, patch), proj))


def patch_embed_backward(clip: Tensor, patch: int, proj: LinearParams, grad: Tensor) -> LinearParams:
    """Projection gradients; the clip itself is data and gets none."""
    _, grads = linear_backward(patchify(clip, patch), proj, grad)
    return grads
