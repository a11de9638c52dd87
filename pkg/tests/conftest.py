import numpy as np
import pytest

from fracnodal.functional import Problem
from fracnodal.model import ModelParams


@pytest.fixture(scope="session")
def small_problem():
    """Coarse grid used by the fast unit tests."""
    return Problem.build(ModelParams(grid_points=64, half_width=8.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_sign_changing(rng, grid, smooth=True):
    """Random field with both signs present."""
    x = grid.nodes if grid.dim == 1 else grid.nodes[:, 0]
    while True:
        if smooth:
            c = rng.normal(size=4)
            w = rng.uniform(0.5, 2.0)
            u = (c[0] + c[1] * x + c[2] * x**2 + c[3] * np.sin(x)) * np.exp(-((x / (3 * w)) ** 2))
        else:
            u = rng.normal(size=grid.size)
        if np.any(u > 0) and np.any(u < 0):
            return u
