"""Window sampling of key/value tokens from the source frame.

A query at (t, x, y) reads (2P+1)^2 tokens from frame t + interval (or frame t
itself when that runs past the clip), at positions (x + dx, y + dy) with dx as
the outer and dy as the inner raster axis. In non-sliding mode every query reads
the window anchored at the frame center instead.

Two implementations live here: :func:`sample_window` walks the positions of a
single query and is what the loop oracles use; :func:`gather_windows` and
:func:`scatter_windows` move whole volumes at once, im2col style.
"""

from dataclasses import dataclass

import numpy as np

from core.attention.config import EmimConfig
from core.attention.volume import TokenVolume
from core.errors import ConfigurationError
from core.tensor.ops import Tensor


@dataclass(frozen=True)
class WindowPosition:
    """Where one window slot reads from."""
    frame: int
    row: int
    col: int
    padded: bool


def window_offsets(radius: int) -> list[tuple[int, int]]:
    return [(dx, dy) for dx in range(-radius, radius + 1) for dy in range(-radius, radius + 1)]


def offset_of_slot(slot: int, radius: int) -> tuple[int, int]:
    window = 2 * radius + 1
    return slot // window - radius, slot % window - radius


def source_frame(t: int, t_extent: int, cfg: EmimConfig) -> int:
    target = t + cfg.interval
    return target if target < t_extent else t


def source_frames(t_extent: int, cfg: EmimConfig) -> np.ndarray:
    return np.array([source_frame(t, t_extent, cfg) for t in range(t_extent)], dtype=np.int64)


def window_anchor(x: int, y: int, h: int, w: int, cfg: EmimConfig) -> tuple[int, int]:
    if cfg.sampling == "sliding":
        return x, y
    return h // 2, w // 2


def window_positions(t: int, x: int, y: int, shape: tuple, cfg: EmimConfig) -> list[WindowPosition]:
    """Resolve every slot of the window for query (t, x, y) on a (T, H, W, C) volume."""
    t_extent, h, w, _ = shape
    frame = source_frame(t, t_extent, cfg)
    ax, ay = window_anchor(x, y, h, w, cfg)
    positions = []
    for dx, dy in window_offsets(cfg.radius):
        row, col = ax + dx, ay + dy
        inside = 0 <= row < h and 0 <= col < w
        if not inside and cfg.boundary == "clamp_edge":
            row = min(max(row, 0), h - 1)
            col = min(max(col, 0), w - 1)
            inside = True
        positions.append(WindowPosition(frame, row, col, padded=not inside))
    return positions


def sample_window(vol: TokenVolume, t: int, x: int, y: int, cfg: EmimConfig) -> Tensor:
    """Return the (2P+1)^2 x C tokens a query at (t, x, y) attends to.

    Raises:
        ConfigurationError: If the window is larger than the frame or the query
            index lies outside the volume.
    """
    cfg.validate_for(vol.shape)
    if not (0 <= t < vol.t_extent and 0 <= x < vol.h_extent and 0 <= y < vol.w_extent):
        raise ConfigurationError(f"query ({t}, {x}, {y}) outside volume {vol.shape[:3]}")
    tokens = np.empty((cfg.window_area, vol.channels))
    for slot, pos in enumerate(window_positions(t, x, y, vol.shape, cfg)):
        if pos.padded:
            tokens[slot] = cfg.pad_value
        else:
            tokens[slot] = vol.values[pos.frame, pos.row, pos.col]
    return tokens


def _pad_source(values: Tensor, cfg: EmimConfig) -> Tensor:
    p = cfg.radius
    src = values[source_frames(values.shape[0], cfg)]
    widths = ((0, 0), (p, p), (p, p), (0, 0))
    if cfg.boundary == "pad_constant":
        return np.pad(src, widths, mode="constant", constant_values=cfg.pad_value)
    return np.pad(src, widths, mode="edge")


def gather_windows(values: Tensor, cfg: EmimConfig) -> Tensor:
    """Gather every query's window: (T, H, W, C) -> (T, H, W, (2P+1)^2, C)."""
    t_extent, h, w, c = values.shape
    p = cfg.radius
    padded = _pad_source(values, cfg)
    cx, cy = h // 2, w // 2
    out = np.empty((t_extent, h, w, cfg.window_area, c))
    for slot, (dx, dy) in enumerate(window_offsets(p)):
        if cfg.sampling == "sliding":
            out[:, :, :, slot, :] = padded[:, p + dx:p + dx + h, p + dy:p + dy + w, :]
        else:
            out[:, :, :, slot, :] = padded[:, None, None, p + cx + dx, p + cy + dy, :]
    return out


def scatter_windows(grad: Tensor, shape: tuple, cfg: EmimConfig) -> Tensor:
    """Adjoint of :func:`gather_windows`; gradient reaching padding is dropped."""
    t_extent, h, w, c = shape
    p = cfg.radius
    cx, cy = h // 2, w // 2
    acc = np.zeros((t_extent, h + 2 * p, w + 2 * p, c))
    for slot, (dx, dy) in enumerate(window_offsets(p)):
        if cfg.sampling == "sliding":
            acc[:, p + dx:p + dx + h, p + dy:p + dy + w, :] += grad[:, :, :, slot, :]
        else:
            acc[:, p + cx + dx, p + cy + dy, :] += np.sum(grad[:, :, :, slot, :], axis=(1, 2))

    if cfg.boundary == "clamp_edge":
        acc[:, p] += np.sum(acc[:, :p], axis=1)
        acc[:, p + h - 1] += np.sum(acc[:, p + h:], axis=1)
    acc = acc[:, p:p + h]
    if cfg.boundary == "clamp_edge":
        acc[:, :, p] += np.sum(acc[:, :, :p], axis=2)
        acc[:, :, p + w - 1] += np.sum(acc[:, :, p + w:], axis=2)
    acc = acc[:, :, p:p + w]

    out = np.zeros(shape)
    for t, frame in enumerate(source_frames(t_extent, cfg)):
        out[frame] += acc[t]
    return out
