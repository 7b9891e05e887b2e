from core.model.block import BlockParams, LayerNormParams, block_backward, block_forward
from core.model.checkpoint import load_checkpoint, save_checkpoint
from core.model.embed import patch_embed, patch_embed_backward, patchify
from core.model.stack import (
    BlockPattern,
    Model,
    ModelConfig,
    batch_forward,
    build_stack,
    model_backward,
    model_forward,
)

__all__ = [
    "BlockParams",
    "LayerNormParams",
    "block_backward",
    "block_forward",
    "load_checkpoint",
    "save_checkpoint",
    "patch_embed",
    "patch_embed_backward",
    "patchify",
    "BlockPattern",
    "Model",
    "ModelConfig",
    "batch_forward",
    "build_stack",
    "model_backward",
    "model_forward",
]
