import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from convcool.forward import Discretization

settings.register_profile(
    "default", deadline=None, max_examples=25,
    suppress_health_check=[HealthCheck.function_scoped_fixture, HealthCheck.too_slow])
settings.load_profile("default")

_DISCS = {}


def disc(n, skew=False):
    """Shared read-only discretizations; building one is the slow part."""
    key = (n, skew)
    if key not in _DISCS:
        _DISCS[key] = Discretization(n, skew=skew)
    return _DISCS[key]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
