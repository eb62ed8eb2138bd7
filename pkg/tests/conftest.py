import numpy as np
import pytest

from vilas.config import SystemConfig


@pytest.fixture
def cfg() -> SystemConfig:
    return SystemConfig().validate()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
