import numpy as np
import pytest

from harness.registry import get_problem
from splitting.grid import GridFunction, make_grid
from splitting.problem import OperatorSpec
from splitting.substep import PropagatorConfig


@pytest.fixture
def grid64():
    return make_grid(1, 64)


@pytest.fixture
def grid32():
    return make_grid(1, 32)


@pytest.fixture
def grid2d():
    return make_grid(2, 16)


@pytest.fixture
def cfg():
    return PropagatorConfig()


@pytest.fixture
def heat():
    return OperatorSpec.build(1, a2=[["1"]])


@pytest.fixture
def potential():
    return OperatorSpec.build(1, a0="cos(x1)")


@pytest.fixture
def p1():
    return get_problem("p1_heat_potential")


@pytest.fixture
def p1_unforced():
    return get_problem("p1_unforced")


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def band_limited(grid, rng, modes=4):
    """Random trigonometric polynomial with a few low modes."""
    values = np.zeros(grid.shape)
    coordinates = grid.coordinates
    for _ in range(modes):
        k = rng.integers(0, 5, size=grid.dim)
        phase = np.sum([k[a] * coordinates[a] for a in range(grid.dim)], axis=0)
        values = values + rng.normal() * np.cos(phase) + rng.normal() * np.sin(phase)
    return GridFunction(grid, values)


@pytest.fixture
def random_field(rng):
    return lambda grid, modes=4: band_limited(grid, rng, modes)
