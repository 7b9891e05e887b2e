"""Read a clip's displacement straight off the raw affinity field."""

import numpy as np

from core.attention.config import EmimConfig
from core.attention.emim import build_affinity
from core.attention.sampling import offset_of_slot
from core.attention.volume import RelPosBias, TokenVolume
from core.errors import ConfigurationError
from core.synthetic.motion import MotionClip
from core.tensor.ops import Tensor, as_tensor


def phase_embed(clip: Tensor) -> TokenVolume:
    """Map each pixel p in [0, 1) to the unit token (cos pi p, sin pi p).

    Two tokens have inner product cos(pi (p - p')), which peaks only when the
    intensities agree.
    """
    clip = as_tensor(clip)
    if clip.ndim == 4:
        clip = clip[..., 0]
    angle = np.pi * clip
    return TokenVolume(np.stack([np.cos(angle), np.sin(angle)], axis=-1))


def displacement_probe(clip: MotionClip, cfg: EmimConfig) -> tuple[int, int]:
    """Predict the per-step shift of a translating clip.

    Tokens are phase-embedded pixels, projections are the identity and the
    bias is zero, so each affinity row is pure window similarity. Every
    interior query (window fully inside the frame) votes for its argmax slot;
    the most voted slot wins, lower slot index on ties. Only queries whose
    source frame differs from their own frame vote.

    Raises:
        ConfigurationError: If the true shift does not fit in the window, in
            which case recovery is undefined.
    """
    dx, dy = clip.shift
    reach = cfg.interval * max(abs(dx), abs(dy))
    if reach > cfg.radius:
        raise ConfigurationError(
            f"shift {clip.shift} over interval {cfg.interval} reaches {reach} pixels, "
            f"beyond window radius {cfg.radius}; recovery is undefined"
        )
    probe_cfg = cfg.with_overrides(heads=1, sampling="sliding")
    tokens = phase_embed(clip.clip)
    field = build_affinity(tokens, tokens, RelPosBias.zeros(probe_cfg), probe_cfg).values[0]

    t_extent, h, w, _ = field.shape
    p = probe_cfg.radius
    voting_frames = t_extent - probe_cfg.interval
    if voting_frames < 1:
        raise ConfigurationError(f"a {t_extent}-frame clip has no frame pair at interval {probe_cfg.interval}")
    interior = field[:voting_frames, p:h - p, p:w - p]
    winners = np.argmax(interior, axis=-1).ravel()
    votes = np.bincount(winners, minlength=probe_cfg.window_area)
    slot = int(np.argmax(votes))
    step = offset_of_slot(slot, p)
    return step[0] // probe_cfg.interval, step[1] // probe_cfg.interval
