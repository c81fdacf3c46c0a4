"""Shared fixtures.  The two expensive builds (a k=0 walk matrix and the
alpha table at h = 0.5) happen once per session; everything else is cheap
enough to construct inline."""

import pytest

from cuspwalk.geometry import CuspProfile
from cuspwalk.montecarlo import ball_table
from cuspwalk.operator import GridSpec, assemble_mode_operator, stationary_measure


@pytest.fixture(scope="session")
def profile():
    return CuspProfile()


@pytest.fixture(scope="session")
def wide_profile():
    # circumference long enough that the first nonzero mode binds a state
    return CuspProfile(ell=60.0)


@pytest.fixture(scope="session")
def op_half(profile):
    grid = GridSpec.for_step(0.5, 6.0, 8)
    return assemble_mode_operator(profile, 0.5, 0, grid)


@pytest.fixture(scope="session")
def nu_half(op_half):
    return stationary_measure(op_half)


@pytest.fixture(scope="session")
def table_half(profile):
    return ball_table(profile, 0.5)
