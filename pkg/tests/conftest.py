import numpy as np
import pytest

from hopf_dynlab import HopfParams, general2d_map, power_map, triangular_map


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def params2():
    return HopfParams(2, 2.0)


@pytest.fixture
def power2(params2):
    return power_map(params2, 2)


@pytest.fixture
def power3(params2):
    return power_map(params2, 3)


@pytest.fixture
def tri2(params2):
    return triangular_map(params2, (1.0, 0.0, 1.0), 1.0)


@pytest.fixture
def gen2(params2):
    # a generic-looking pair of quadratic binary forms
    return general2d_map(params2, (1.0, 0.3 - 0.2j, 0.1), (0.2j, -0.4, 1.0 + 0.1j))


def random_lifts(rng, n, k):
    return rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
