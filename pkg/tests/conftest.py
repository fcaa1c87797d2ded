import numpy as np
import pytest

from diraclimit.emfield import make_potential


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def time_dependent_model():
    """A composite preset exercising grad A0, dA/dt and curl A at once."""
    return make_potential([
        {"preset": "gaussian_bump_A0", "amplitude": 0.7, "width": 1.3, "center": [0.1, 0.2, -0.3]},
        {"preset": "time_pulse", "amplitude": [0.2, 0.5, -0.3], "direction": [1, 2, 0.5], "omega": 2.0},
        {"preset": "uniform_B", "B0": [0.3, -0.4, 0.8]},
    ])


@pytest.fixture
def td_model():
    return time_dependent_model()
