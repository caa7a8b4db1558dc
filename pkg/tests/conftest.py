import numpy as np
import pytest

from modules.cache_utils import clear_all_caches
from modules.geometry import PhysicalParams


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running trajectory or sweep test")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def gravity_only():
    return PhysicalParams(A_mu=0.0, A_rhosigma=1.0)


@pytest.fixture
def coupled():
    return PhysicalParams(A_mu=0.5, A_rhosigma=1.0)


@pytest.fixture
def fresh_caches():
    clear_all_caches()
    yield
    clear_all_caches()
