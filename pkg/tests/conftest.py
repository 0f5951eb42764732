import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kboost.experiments import SimulationModel, simulate

settings.register_profile("kboost", deadline=None, max_examples=30, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("kboost")


def design(n, seed=0, model="m1", errors="normal"):
    """A seeded sample from the uniform simulation design."""
    return simulate(SimulationModel(model, errors), n, seed)


@pytest.fixture
def data20():
    return design(20, seed=11)[0]


@pytest.fixture
def data50():
    return design(50, seed=5)[0]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
