"""Mini-batch gradient descent on the synthetic direction task.

Clips are visited in their fixed dataset order; per-clip gradients are summed
in that order and averaged per batch, so a run is a pure function of its
inputs and seed.
"""

import math
from contextlib import nullcontext
from dataclasses import dataclass, field

import numpy as np

from core.errors import ConfigurationError, DivergenceError
from core.logger import logger
from core.model.stack import Model, batch_forward, model_backward, model_forward
from core.synthetic.motion import MotionClip
from core.tensor.ops import fast_matmul
from core.training.objective import clip_grad_norm, cross_entropy, learning_rate, sgd_step

ABLATIONS = ("motion",)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    learning_rate: float
    batch_size: int
    warmup_fraction: float = 0.05
    ablate: tuple[str, ...] = ()
    threads: int = 1
    # Global gradient-norm bound per step; None disables clipping
    clip_norm: float | None = 1.0
    # BLAS matmul for speed; False keeps the fixed-order accumulation
    fast_matmul: bool = True

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigurationError(f"epochs must be nonnegative, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch size must be positive, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ConfigurationError(f"learning rate must be positive, got {self.learning_rate}")
        if self.clip_norm is not None and not self.clip_norm > 0:
            raise ConfigurationError(f"clip norm must be positive, got {self.clip_norm}")
        unknown = set(self.ablate) - set(ABLATIONS)
        if unknown:
            raise ConfigurationError(f"unknown ablation {sorted(unknown)}; choose from {ABLATIONS}")


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    train_acc: float
    val_acc: float
    lr: float

    def as_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "train_acc": self.train_acc,
            "val_acc": self.val_acc,
            "lr": self.lr,
        }


@dataclass
class TrainResult:
    history: list[EpochMetrics] = field(default_factory=list)
    frozen: list[str] = field(default_factory=list)

    @property
    def final(self) -> EpochMetrics:
        return self.history[-1]


def motion_parameter_names(model: Model) -> list[str]:
    return [name for name in model.named_parameters() if ".attn.motion." in name]


def ablate_motion(model: Model) -> list[str]:
    """Zero every motion-MLP tensor in place and return their names."""
    names = motion_parameter_names(model)
    params = model.named_parameters()
    for name in names:
        params[name][...] = 0.0
    logger.info(f"Motion path ablated: {len(names)} tensors zeroed and frozen")
    return names


def accuracy(model: Model, clips: list[MotionClip], threads: int = 1) -> float:
    if not clips:
        return float("nan")
    logits = batch_forward(model, [c.clip for c in clips], threads)
    labels = np.array([c.label for c in clips])
    return float(np.mean(np.argmax(logits, axis=1) == labels))


def train_toy(model: Model, train: list[MotionClip], val: list[MotionClip], cfg: TrainConfig) -> TrainResult:
    """Train ``model`` in place.

    Epoch 0 in the history is the untrained model.

    Raises:
        DivergenceError: If a batch loss is not finite.
    """
    with fast_matmul() if cfg.fast_matmul else nullcontext():
        return _train(model, train, val, cfg)


def _train(model: Model, train: list[MotionClip], val: list[MotionClip], cfg: TrainConfig) -> TrainResult:
    if not train:
        raise ConfigurationError("training set is empty")
    frozen = ablate_motion(model) if "motion" in cfg.ablate else []
    frozen_set = frozenset(frozen)
    params = model.named_parameters()

    batches = [train[i:i + cfg.batch_size] for i in range(0, len(train), cfg.batch_size)]
    total_steps = cfg.epochs * len(batches)
    result = TrainResult(frozen=frozen)
    result.history.append(EpochMetrics(0, float("nan"), accuracy(model, train, cfg.threads),
                                       accuracy(model, val, cfg.threads), 0.0))
    logger.info(f"Epoch 0: val acc {result.history[0].val_acc:.3f} (untrained)")

    step = 0
    lr = 0.0
    for epoch in range(1, cfg.epochs + 1):
        loss_sum, hits = 0.0, 0
        for batch in batches:
            lr = learning_rate(step, total_steps, cfg.learning_rate, cfg.warmup_fraction)
            grads = {name: np.zeros_like(p) for name, p in params.items()}
            batch_loss = 0.0
            for clip in batch:
                logits, cache = model_forward(model, clip.clip, return_cache=True)
                loss, g_logits = cross_entropy(logits, clip.label)
                batch_loss += loss
                hits += int(np.argmax(logits) == clip.label)
                for name, g in model_backward(model, cache, g_logits).items():
                    grads[name] += g
            if not math.isfinite(batch_loss):
                logger.error(f"Loss diverged at epoch {epoch}, step {step}")
                raise DivergenceError(epoch, batch_loss)
            scale = 1.0 / len(batch)
            for g in grads.values():
                g *= scale
            if cfg.clip_norm is not None:
                clip_grad_norm(grads, cfg.clip_norm, frozen_set)
            sgd_step(params, grads, lr, frozen_set)
            loss_sum += batch_loss
            step += 1
        metrics = EpochMetrics(epoch, loss_sum / len(train), hits / len(train),
                               accuracy(model, val, cfg.threads), lr)
        result.history.append(metrics)
        logger.info(
            f"Epoch {epoch}/{cfg.epochs}: loss {metrics.train_loss:.4f}, "
            f"train acc {metrics.train_acc:.3f}, val acc {metrics.val_acc:.3f}"
        )
    return result
