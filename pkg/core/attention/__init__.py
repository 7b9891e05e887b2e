"""Windowed cross-frame attention, its baselines and reference oracles."""

from core.attention.config import EmimConfig
from core.attention.cost_volume import cost_volume_backward, cost_volume_forward
from core.attention.emim import (
    aggregate_context,
    appearance_forward,
    build_affinity,
    combine_features,
    emim_backward,
    emim_forward,
    motion_transform,
    nonsliding_forward,
    normalize_affinity,
)
from core.attention.global_attention import global_attention_backward, global_attention_forward
from core.attention.params import AttentionParams, EmimParams, MotionMlpParams
from core.attention.sampling import sample_window, window_positions
from core.attention.volume import AffinityField, RelPosBias, TokenVolume

__all__ = [
    "EmimConfig",
    "cost_volume_backward",
    "cost_volume_forward",
    "aggregate_context",
    "appearance_forward",
    "build_affinity",
    "combine_features",
    "emim_backward",
    "emim_forward",
    "motion_transform",
    "nonsliding_forward",
    "normalize_affinity",
    "global_attention_backward",
    "global_attention_forward",
    "AttentionParams",
    "EmimParams",
    "MotionMlpParams",
    "sample_window",
    "window_positions",
    "AffinityField",
    "RelPosBias",
    "TokenVolume",
]
