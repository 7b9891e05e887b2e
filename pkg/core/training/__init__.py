from core.training.objective import clip_grad_norm, cross_entropy, learning_rate, sgd_step
from core.training.trainer import EpochMetrics, TrainConfig, TrainResult, ablate_motion, accuracy, train_toy

__all__ = [
    "clip_grad_norm",
    "cross_entropy",
    "learning_rate",
    "sgd_step",
    "EpochMetrics",
    "TrainConfig",
    "TrainResult",
    "ablate_motion",
    "accuracy",
    "train_toy",
]
