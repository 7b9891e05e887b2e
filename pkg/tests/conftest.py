"""Pytest configuration and fixtures for the workbench tests."""

import os

os.environ.setdefault("LOG_TO_FILE", "false")
os.environ.setdefault("LOG_LEVEL", "WARNING")

import numpy as np
import pytest

from core.attention.config import EmimConfig
from core.attention.params import EmimParams
from core.attention.volume import TokenVolume


@pytest.fixture
def rng():
    """Return a seeded generator."""
    return np.random.default_rng(1234)


@pytest.fixture
def small_cfg():
    """Return a radius-1, two-head sliding config."""
    return EmimConfig(radius=1, heads=2)


@pytest.fixture
def volume(rng):
    """Return a random (2, 5, 5, 8) token volume."""
    return TokenVolume(rng.standard_normal((2, 5, 5, 8)))


@pytest.fixture
def emim_params(rng, small_cfg):
    """Return random EMIM parameters for eight channels."""
    return EmimParams.init(8, small_cfg, rng)


@pytest.fixture
def out_dir(tmp_path):
    """Return a directory for CLI outputs."""
    return tmp_path / "run"
