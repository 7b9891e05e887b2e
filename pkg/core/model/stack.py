"""Block stacks, the classifier head and whole-model forward/backward."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from core.attention.config import EmimConfig
from core.errors import ConfigurationError, DimensionError, StateError
from core.logger import logger
from core.model.block import BlockParams, block_backward, block_forward
from core.model.embed import patch_embed, patch_embed_backward
from core.tensor.linear import LinearParams, linear_backward, linear_forward
from core.tensor.ops import Tensor, as_tensor

MECHANISMS = ("global", "emim", "non_sliding", "cost_volume")


@dataclass(frozen=True)
class BlockPattern:
    """Block kinds over the alphabet {O, E}, repeated cyclically over depth."""
    pattern: str = "EO"

    def __post_init__(self):
        if not self.pattern or set(self.pattern) - {"O", "E"}:
            raise ConfigurationError(f"block pattern must be a nonempty string over O/E, got {self.pattern!r}")

    def kinds(self, depth: int) -> list[str]:
        return [self.pattern[i % len(self.pattern)] for i in range(depth)]

    def __str__(self) -> str:
        return self.pattern


@dataclass(frozen=True)
class ModelConfig:
    """Shape of a classifier stack.

    ``mechanism`` picks what the E blocks run: ``emim`` (sliding windows),
    ``non_sliding`` (one shared window), ``cost_volume`` (global appearance
    plus a windowed motion branch) or ``global`` (every block becomes O).
    """
    depth: int = 2
    channels: int = 32
    heads: int = 2
    num_classes: int = 8
    ffn_expansion: int = 4
    emim: EmimConfig = field(default_factory=EmimConfig)
    pattern: BlockPattern = field(default_factory=BlockPattern)
    patch: int = 1
    in_channels: int = 1
    mechanism: str = "emim"

    def __post_init__(self):
        if self.depth < 1:
            raise ConfigurationError(f"depth must be at least 1, got {self.depth}")
        if self.heads < 1 or self.channels % self.heads:
            raise ConfigurationError(f"{self.channels} channels are not divisible by {self.heads} heads")
        if self.num_classes < 1:
            raise ConfigurationError(f"num_classes must be positive, got {self.num_classes}")
        if self.mechanism not in MECHANISMS:
            raise ConfigurationError(f"mechanism must be one of {MECHANISMS}, got {self.mechanism!r}")
        if isinstance(self.pattern, str):
            object.__setattr__(self, "pattern", BlockPattern(self.pattern))
        emim = replace(self.emim, heads=self.heads)
        if self.mechanism == "non_sliding":
            emim = replace(emim, sampling="non_sliding")
        object.__setattr__(self, "emim", emim)

    @property
    def kinds(self) -> list[str]:
        if self.mechanism == "global":
            return ["O"] * self.depth
        return self.pattern.kinds(self.depth)

    @property
    def variant(self) -> str:
        return "cost_volume" if self.mechanism == "cost_volume" else "emim"

    def to_dict(self) -> dict:
        """Plain structure for YAML; the mechanism config travels separately."""
        return {
            "depth": self.depth,
            "channels": self.channels,
            "heads": self.heads,
            "num_classes": self.num_classes,
            "ffn_expansion": self.ffn_expansion,
            "pattern": self.pattern.pattern,
            "patch": self.patch,
            "in_channels": self.in_channels,
            "mechanism": self.mechanism,
        }

    @classmethod
    def from_dict(cls, data: dict, emim: EmimConfig) -> "ModelConfig":
        try:
            return cls(emim=emim, **data)
        except TypeError as exc:
            raise ConfigurationError(f"bad model config: {exc}") from exc


@dataclass
class Model:
    cfg: ModelConfig
    embed: LinearParams
    blocks: list[BlockParams]
    head: LinearParams

    @property
    def kinds(self) -> list[str]:
        return [b.kind for b in self.blocks]

    def named_parameters(self) -> dict[str, Tensor]:
        """Live parameter arrays keyed by path, e.g. ``blocks.0.attn.q.weight``."""
        named = dict(self.embed.named("embed"))
        for i, block in enumerate(self.blocks):
            named.update(block.named(f"blocks.{i}"))
        named.update(self.head.named("head"))
        return named

    def num_parameters(self) -> int:
        return sum(t.size for t in self.named_parameters().values())


@dataclass
class ModelCache:
    clip: Tensor
    token_shape: tuple
    block_caches: list
    pooled: Tensor


def build_stack(cfg: ModelConfig, seed: int = 0) -> Model:
    rng = np.random.default_rng(seed)
    token_dim = cfg.patch * cfg.patch * cfg.in_channels
    embed = LinearParams.init(token_dim, cfg.channels, rng)
    blocks = [
        BlockParams.init(kind, cfg.channels, cfg.emim, rng, cfg.ffn_expansion)
        for kind in cfg.kinds
    ]
    head = LinearParams.init(cfg.channels, cfg.num_classes, rng)
    model = Model(cfg, embed, blocks, head)
    logger.debug(
        f"Built {cfg.mechanism} stack {''.join(model.kinds)} "
        f"(d={cfg.channels}, heads={cfg.heads}, {model.num_parameters()} params)"
    )
    return model


def model_forward(model: Model, clip: Tensor, return_cache: bool = False):
    """Clip (T, H_px, W_px, ch) -> logits (num_classes,)."""
    clip = as_tensor(clip)
    cfg = model.cfg
    if clip.ndim != 4 or clip.shape[-1] != cfg.in_channels:
        raise DimensionError(
            f"clip must be (T, H_px, W_px, {cfg.in_channels})", clip.shape
        )
    z = patch_embed(clip, cfg.patch, model.embed)
    caches = []
    for block in model.blocks:
        z, cache = block_forward(z, block.kind, block, cfg.emim, cfg.variant, return_cache=True)
        caches.append(cache)
    pooled = z.values.reshape(-1, cfg.channels).mean(axis=0)
    logits = linear_forward(pooled[None, :], model.head)[0]
    if not return_cache:
        return logits
    return logits, ModelCache(clip, z.shape, caches, pooled)


def model_backward(model: Model, cache: ModelCache | None, g_logits: Tensor) -> dict[str, Tensor]:
    """Gradients of every parameter, keyed like :meth:`Model.named_parameters`."""
    if cache is None:
        raise StateError("model_backward needs the cache returned by model_forward")
    g_logits = as_tensor(g_logits)
    if g_logits.shape != (model.cfg.num_classes,):
        raise DimensionError("logit gradient has the wrong shape", g_logits.shape, (model.cfg.num_classes,))

    g_pooled, g_head = linear_backward(cache.pooled[None, :], model.head, g_logits[None, :])
    n_tokens = int(np.prod(cache.token_shape[:-1]))
    g_z = np.broadcast_to(g_pooled[0] / n_tokens, cache.token_shape).copy()

    block_grads = [None] * len(model.blocks)
    for i in reversed(range(len(model.blocks))):
        g_z, block_grads[i] = block_backward(g_z, cache.block_caches[i])
    g_embed = patch_embed_backward(cache.clip, model.cfg.patch, model.embed, g_z)
    return Model(model.cfg, g_embed, block_grads, g_head).named_parameters()


def batch_forward(model: Model, clips: list[Tensor], threads: int = 1) -> Tensor:
    """Logits for each clip, in input order."""
    if threads <= 1:
        return np.stack([model_forward(model, c) for c in clips])
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return np.stack(list(pool.map(lambda c: model_forward(model, c), clips)))
