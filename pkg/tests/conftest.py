import os
from unittest.mock import patch

import numpy as np
import pytest
import torch

from schema.config import DecoderConfig, ModelConfig, TrunkConfig, UScalingConfig


def pytest_addoption(parser):
    parser.addoption(
        "--run-slow", action="store_true", default=False, help="run slow convergence tests"
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: mark test as a long-running training run")


def pytest_collection_modifyitems(config, items):
    if not config.getoption("--run-slow"):
        skip_slow = pytest.mark.skip(reason="need --run-slow option to run")
        for item in items:
            if "slow" in item.keywords:
                item.add_marker(skip_slow)


@pytest.fixture
def mock_env():
    """Fixture to ensure environment is clean for each test."""
    with patch.dict(os.environ, {}, clear=True):
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _seed_torch():
    torch.manual_seed(0)


@pytest.fixture
def tiny_model_config():
    """A 32x32 model with 2 stages, small enough for many forward passes per test."""
    return ModelConfig(
        trunk=TrunkConfig(
            image_size=32, patch_size=8, embed_dim=16, num_stages=2, num_heads=2
        ),
        adapter=UScalingConfig(num_modules=2, num_scales=2, channels=4),
        decoder=DecoderConfig(width=8, mlp_hidden=16, groups=4),
    )
