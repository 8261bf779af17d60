import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from quasispec import BoundaryParams, biorthonormalize, find_eigenvalues, make_grid  # noqa: E402

settings.register_profile(
    "quasispec",
    deadline=None,
    max_examples=12,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("quasispec")

HALF_PI = np.pi / 2


@pytest.fixture(scope="session")
def grid_pi2():
    """Default 16 x 12 grid on (-pi/2, pi/2)."""
    return make_grid(HALF_PI, 16, 12)


@pytest.fixture(scope="session")
def grid_one():
    return make_grid(1.0, 16, 12)


@pytest.fixture(scope="session")
def pt_half():
    """Parameters alpha = 0.5, beta = 0, a = pi/2."""
    return BoundaryParams.from_pt(0.5, 0.0, HALF_PI)


@pytest.fixture(scope="session")
def pt_half_triples(pt_half):
    """First 12 biorthonormal triples for alpha = 0.5, beta = 0, a = pi/2."""
    return biorthonormalize(find_eigenvalues(pt_half, 12)[:12])


@pytest.fixture(scope="session")
def pt_half_1600(pt_half):
    """1600 biorthonormal triples for alpha = 0.5, beta = 0, a = pi/2 (about 25 s, shared)."""
    return biorthonormalize(find_eigenvalues(pt_half, 1600)[:1600])
