import numpy as np
import pytest

from reachkit.dynamics import Bounds
from reachkit.grid import Grid3
from reachkit.levelset import sdf_obstacles, sdf_target, solve_hji_vi

PAPER_T = 8.0
PAPER_DT_OUT = 0.25


@pytest.fixture(scope="session")
def paper_grid():
    return Grid3()


@pytest.fixture(scope="session")
def paper_bounds():
    return Bounds(v_min=0.0, v_max=1.0, omega_max=1.0, d_bar=0.1, d_theta_bar=0.1)


@pytest.fixture(scope="session")
def target_field(paper_grid):
    return sdf_target(paper_grid, 1.0)


@pytest.fixture(scope="session")
def free_g(paper_grid):
    return sdf_obstacles(paper_grid, [])


@pytest.fixture(scope="session")
def free_solve(paper_grid, target_field, free_g, paper_bounds):
    """Obstacle-free solve at paper scale, shared across the suite."""
    return solve_hji_vi(paper_grid, target_field, free_g, paper_bounds,
                        T=PAPER_T, dt_out=PAPER_DT_OUT)


@pytest.fixture()
def rng():
    # function-scoped so draws are independent of test execution order
    return np.random.default_rng(20240817)
