import numpy as np
import pytest

from app.core.config import ForestConfig
from app.core.dataset import Dataset


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow Monte Carlo tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def step_data() -> Dataset:
    return Dataset(features=[[0.0], [1.0], [2.0], [3.0]], response=[0.0, 0.0, 10.0, 10.0])


@pytest.fixture
def small_data() -> Dataset:
    rng = np.random.default_rng(7)
    x = rng.uniform(size=(40, 3))
    y = 3 * x[:, 0] - 2 * x[:, 1] + rng.standard_normal(40)
    return Dataset(features=x, response=y)


@pytest.fixture
def tree_config() -> ForestConfig:
    return ForestConfig(k=10, m=2, b=4, mtry=2, nodesize=2, seed=11)
