"""Checkpoint directories.

One tensor fixture per parameter, named by its path (``blocks.0.attn.q.weight``),
next to ``model.cfg`` (the mechanism config text) and ``model.yaml``.
"""

from pathlib import Path

import yaml

from core.attention.config import EmimConfig
from core.errors import ConfigurationError, DimensionError
from core.logger import logger
from core.model.stack import Model, ModelConfig, build_stack
from core.tensor.fixtures import read_tensor, write_tensor

MECHANISM_FILE = "model.cfg"
MODEL_FILE = "model.yaml"


def save_checkpoint(model: Model, directory: Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, tensor in model.named_parameters().items():
        write_tensor(directory / name, tensor)
    (directory / MECHANISM_FILE).write_text(model.cfg.emim.to_text())
    with open(directory / MODEL_FILE, "w") as f:
        yaml.safe_dump(model.cfg.to_dict(), f, sort_keys=False)
    logger.info(f"Saved checkpoint ({len(model.named_parameters())} tensors) to {directory}")
    return directory


def load_checkpoint(directory: Path) -> Model:
    """Rebuild a model from :func:`save_checkpoint` output.

    Raises:
        ConfigurationError: If a config file or parameter file is missing.
        DimensionError: If a stored tensor does not fit the rebuilt model.
        FixtureFormatError: If a tensor file is corrupt.
    """
    directory = Path(directory)
    try:
        emim = EmimConfig.from_text((directory / MECHANISM_FILE).read_text())
        with open(directory / MODEL_FILE) as f:
            data = yaml.safe_load(f) or {}
    except FileNotFoundError as exc:
        raise ConfigurationError(f"incomplete checkpoint in {directory}: {exc.filename}") from exc

    model = build_stack(ModelConfig.from_dict(data, emim))
    for name, target in model.named_parameters().items():
        path = directory / name
        if not path.exists():
            raise ConfigurationError(f"checkpoint {directory} has no tensor {name}")
        stored = read_tensor(path)
        if stored.shape != target.shape:
            raise DimensionError(f"checkpoint tensor {name} has the wrong shape", stored.shape, target.shape)
        target[...] = stored
    logger.debug(f"Loaded checkpoint from {directory}")
    return model
