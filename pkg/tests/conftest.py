import numpy as np
import pytest

from bnkf.geom import SensorPose
from bnkf.simkit import NOISE_TIERS


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def origin():
    return SensorPose([0.0, 0.0, 0.0])


@pytest.fixture
def high_sigmas():
    return NOISE_TIERS["high"]


@pytest.fixture
def low_sigmas():
    return NOISE_TIERS["low"]


@pytest.fixture
def random_states(rng):
    """Interleaved 6-D states off the zenith, 500 m to 8 km from the origin."""
    def make(n, min_range=500.0, max_range=8000.0):
        rho = rng.uniform(min_range, max_range, n)
        bearing = rng.uniform(-np.pi, np.pi, n)
        elevation = rng.uniform(-1.2, 1.2, n)
        states = np.zeros((n, 6))
        states[:, 0] = rho * np.cos(elevation) * np.cos(bearing)
        states[:, 2] = rho * np.cos(elevation) * np.sin(bearing)
        states[:, 4] = rho * np.sin(elevation)
        states[:, [1, 3, 5]] = rng.uniform(-30.0, 30.0, (n, 3))
        return states
    return make


@pytest.fixture
def random_spd(rng):
    def make(n, scale=1.0):
        A = rng.standard_normal((n, n))
        return scale * (A @ A.T + n * np.eye(n))
    return make
