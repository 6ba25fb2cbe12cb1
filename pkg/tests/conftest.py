import numpy as np
import pytest

from ivfbalance import VectorSet


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_vectors(rng, n, dim, scale=1.0):
    """Random float32 VectorSet used across tests."""
    return VectorSet.from_array(rng.standard_normal((n, dim)) * scale)


@pytest.fixture
def small_set(rng):
    return random_vectors(rng, 100, 4)
