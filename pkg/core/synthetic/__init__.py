from core.synthetic.motion import (
    MotionClip,
    class_shifts,
    gen_direction_dataset,
    gen_translation_pair,
    grid_shifts,
    load_dataset,
    save_dataset,
    split_dataset,
)
from core.synthetic.probe import displacement_probe, phase_embed

__all__ = [
    "MotionClip",
    "class_shifts",
    "gen_direction_dataset",
    "gen_translation_pair",
    "grid_shifts",
    "load_dataset",
    "save_dataset",
    "split_dataset",
    "displacement_probe",
    "phase_embed",
]
