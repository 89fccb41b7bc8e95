"""Shared fixtures.

The reference variational chart (p=4, t=1, horizon 1.3, a two-level
measure) is the one genuinely expensive object several test modules
share, so it is solved once per session. Everything else is cheap
enough to build inline.
"""

import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))  # lets tests `import oracles`

settings.register_profile(
    "research",
    deadline=None,  # PDE warm-up inside a property would trip the default
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("research")


@pytest.fixture(scope="session")
def ref_chart():
    """(lam, gamma, params) of the shared reference instance."""
    from lpgroth.boundary import BoundaryParams
    from lpgroth.pde import atomic_measure

    gamma = atomic_measure(1.3, [0.6], [0.3, 1.1])
    return 0.5, gamma, BoundaryParams(p=4.0, t=1.0)


@pytest.fixture(scope="session")
def ref_solution(ref_chart):
    from lpgroth.pde import solve_parisi_pde

    lam, gamma, params = ref_chart
    return solve_parisi_pde(lam, gamma, params)


@pytest.fixture(scope="session")
def goe_64():
    from lpgroth.core import sample_matrix

    return sample_matrix(64, seed=7)
