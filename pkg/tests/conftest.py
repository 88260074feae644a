"""Shared fixtures: the propanediol parameter set and its derived rates."""
import os
import sys

import pytest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from models.system import ThreeLevelModel, derive_rates  # noqa: E402
from models.units import TWO_PI  # noqa: E402


@pytest.fixture
def model() -> ThreeLevelModel:
    return ThreeLevelModel()


@pytest.fixture
def rates(model):
    return derive_rates(model)


@pytest.fixture
def undamped() -> ThreeLevelModel:
    return ThreeLevelModel(gamma1=0.0, gamma2=0.0, gamma0_b=0.0, gamma0_e=0.0, gamma0_c=0.0)


@pytest.fixture
def detuning():
    """401-point detuning axis over +-4 * 2pi MHz."""
    import numpy as np
    return np.linspace(-4 * TWO_PI, 4 * TWO_PI, 401)
