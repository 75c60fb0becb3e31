# Hypothesis profile: every property test here builds grids or matrices
from hypothesis import HealthCheck, settings
settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# Used for imports of app.py, config.py and the package from the repository root
import os
import sys
sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), ".."))

import pytest

from cavity_transport.model import ModelParams


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long parameter sweeps, deselect with -m 'not slow'")


@pytest.fixture
def small_params():
    """Rescaled rates on a short chain; grids stay at a few thousand points"""
    return ModelParams(n_sites=3, t1=0.0, t2=0.1, g=0.02, kappa=0.02, gamma1=0.01, gamma2=0.01)


@pytest.fixture
def bare_params():
    return ModelParams(n_sites=2, t1=0.05, t2=0.1, g=0.0, kappa=0.05, gamma1=0.01, gamma2=0.01)
