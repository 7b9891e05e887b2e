"""Noise-texture clips translated by a known integer shift per frame step."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from core.errors import ConfigurationError, FixtureFormatError
from core.logger import logger
from core.tensor.fixtures import read_tensor, write_tensor
from core.tensor.ops import Tensor

MAX_SHIFT = 3
CLASS_COUNTS = (4, 8, 49)

# Direction classes in label order
DIRECTIONS_4 = [(1, 0), (0, 1), (-1, 0), (0, -1)]
DIRECTIONS_8 = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)]

MANIFEST_FILE = "manifest.txt"


@dataclass
class MotionClip:
    clip: Tensor  # (T, H_px, W_px, 1)
    label: int
    shift: tuple[int, int]

    @property
    def frames(self) -> int:
        return self.clip.shape[0]


def grid_shifts(max_shift: int = MAX_SHIFT) -> list[tuple[int, int]]:
    """All (dx, dy) in [-max_shift, max_shift]^2, dx outer."""
    span = range(-max_shift, max_shift + 1)
    return [(dx, dy) for dx in span for dy in span]


def class_shifts(classes: int, speed: int = 1) -> list[tuple[int, int]]:
    if classes == 4:
        return [(speed * dx, speed * dy) for dx, dy in DIRECTIONS_4]
    if classes == 8:
        return [(speed * dx, speed * dy) for dx, dy in DIRECTIONS_8]
    if classes == 49:
        return grid_shifts(MAX_SHIFT)
    raise ConfigurationError(f"classes must be one of {CLASS_COUNTS}, got {classes}")


def translate_clip(frame0: Tensor, shift: tuple[int, int], frames: int) -> Tensor:
    """Stack ``frames`` copies of frame0, each cyclically moved by ``shift`` from the last.

    frame[t+1][x, y] == frame[t][x - dx mod H, y - dy mod W].
    """
    out = [frame0]
    for _ in range(frames - 1):
        out.append(np.roll(out[-1], shift, axis=(0, 1)))
    return np.stack(out)[..., None]


def _check_shift(shift: tuple[int, int], extents: tuple[int, int], max_shift: int) -> None:
    if max(abs(shift[0]), abs(shift[1])) > max_shift:
        raise ConfigurationError(f"shift {shift} exceeds the maximum magnitude {max_shift}")
    if min(extents) < 2 * max_shift + 1:
        raise ConfigurationError(f"extents {extents} are smaller than {2 * max_shift + 1}")


def gen_translation_pair(
    seed: int,
    extents: tuple[int, int],
    shift: tuple[int, int],
    max_shift: int = MAX_SHIFT,
) -> MotionClip:
    """Two-frame clip: uniform noise, then the same noise moved by ``shift``.

    The label is the shift's index in :func:`grid_shifts`.

    Raises:
        ConfigurationError: If the shift is out of range or the frame too small.
    """
    shift = (int(shift[0]), int(shift[1]))
    _check_shift(shift, extents, max_shift)
    frame0 = np.random.default_rng(seed).random(extents)
    label = grid_shifts(max_shift).index(shift)
    return MotionClip(translate_clip(frame0, shift, 2), label, shift)


def gen_direction_dataset(
    n: int,
    seed: int,
    classes: int = 8,
    frames: int = 2,
    extents: tuple[int, int] = (16, 16),
    speed: int = 1,
) -> list[MotionClip]:
    """Balanced direction-classification clips.

    Clip ``i`` has label ``i % classes`` and draws its texture from the
    generator seeded with ``(seed, i)``, so any subset can be regenerated alone.

    Raises:
        ConfigurationError: If ``n`` is not a multiple of ``classes`` or a shift is out of range.
    """
    shifts = class_shifts(classes, speed)
    if n < 1 or n % classes:
        raise ConfigurationError(f"{n} clips cannot be split evenly over {classes} classes")
    for shift in shifts:
        _check_shift(shift, extents, MAX_SHIFT)
    clips = []
    for index in range(n):
        label = index % classes
        frame0 = np.random.default_rng((seed, index)).random(extents)
        clips.append(MotionClip(translate_clip(frame0, shifts[label], frames), label, shifts[label]))
    logger.debug(f"Generated {n} clips over {classes} classes (seed {seed})")
    return clips


def split_dataset(clips: list[MotionClip], seed: int) -> tuple[list[MotionClip], list[MotionClip]]:
    """80/20 train/validation split.

    Clips are visited in a seeded shuffled order; every fifth visited clip
    goes to validation. Each part keeps the original index order.
    """
    order = np.random.default_rng(seed).permutation(len(clips))
    val_indices = {int(i) for pos, i in enumerate(order) if pos % 5 == 4}
    train = [c for i, c in enumerate(clips) if i not in val_indices]
    val = [c for i, c in enumerate(clips) if i in val_indices]
    return train, val


def save_dataset(clips: list[MotionClip], directory: Path) -> Path:
    """One fixture per clip (``clip_00000``) plus an ``index, label, dx, dy`` manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = []
    for index, clip in enumerate(clips):
        write_tensor(directory / f"clip_{index:05d}", clip.clip)
        lines.append(f"{index}, {clip.label}, {clip.shift[0]}, {clip.shift[1]}")
    (directory / MANIFEST_FILE).write_text("\n".join(lines) + "\n")
    logger.info(f"Saved {len(clips)} clips to {directory}")
    return directory


def load_dataset(directory: Path) -> list[MotionClip]:
    """Inverse of :func:`save_dataset`.

    Raises:
        FixtureFormatError: On a malformed manifest line or clip file.
    """
    directory = Path(directory)
    clips = []
    for lineno, line in enumerate((directory / MANIFEST_FILE).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            index, label, dx, dy = (int(part) for part in line.split(","))
        except ValueError as exc:
            raise FixtureFormatError(f"manifest line {lineno}: {line!r}") from exc
        clips.append(MotionClip(read_tensor(directory / f"clip_{index:05d}"), label, (dx, dy)))
    return clips
