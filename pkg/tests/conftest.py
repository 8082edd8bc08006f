"""Shared fixtures; the expensive steady-state solves are session-scoped."""
import numpy as np
import pytest

from quenchlab.model import ModelParams
from quenchlab.profiles1d import Grid1D, solve_quench_front
from quenchlab.quench2d import solve_theta


@pytest.fixture(scope="session")
def theta_half_small():
    """Symmetric state at c_x = 0.5 on [-20, 20]^2, h = 0.25 (fast, unit tests)."""
    return solve_theta(0.5, 20.0, 20.0, h=0.25, dt=0.25, tol=1e-9)


@pytest.fixture(scope="session")
def theta_half_fine():
    """Symmetric state at c_x = 0.5 on [-30, 30]^2, h = 0.125 (acceptance grade)."""
    return solve_theta(0.5, 30.0, 30.0, h=0.125, dt=0.1, tol=1e-9)


@pytest.fixture(scope="session")
def theta_half_mid():
    """Symmetric state at c_x = 0.5 on [-30, 30]^2, h = 0.25."""
    return solve_theta(0.5, 30.0, 30.0, h=0.25, dt=0.25, tol=1e-9)


@pytest.fixture(scope="session")
def fronts_cx_half():
    """Top/bottom fronts at alpha = 0, c_x = 0.5 on [-30, 30], h = 0.0125."""
    p = ModelParams(c_x=0.5)
    grid = Grid1D.symmetric(30.0, 0.0125)
    return (solve_quench_front("top", p, grid),
            solve_quench_front("bottom", p, grid))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260808)
