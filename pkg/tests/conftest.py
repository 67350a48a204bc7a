import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from core.grf import GridField, sample_whole_plane_gff  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow Monte Carlo checks")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: Monte Carlo checks that take more than a few seconds")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def flat_field():
    """Zero field on a 16 x 16 grid with spacing 1/4."""
    return GridField(np.zeros((16, 16)), 0.25)


@pytest.fixture
def random_field():
    return sample_whole_plane_gff(32, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
