import numpy as np
import pytest

from tvsim.grid import Grid
from tvsim.materials import ConstantCapacity
from tvsim.tensors import ElasticityTensors, isotropic_tensor


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def grid():
    return Grid(12, 11)


@pytest.fixture
def unit_tensors():
    return ElasticityTensors(D4=isotropic_tensor(1.0, 1.0),
                             C4=isotropic_tensor(1.0, 1.0),
                             B=0.5 * np.eye(2))


@pytest.fixture
def const_model():
    return ConstantCapacity(1.0)


def random_sym2(rng):
    a = rng.standard_normal((2, 2))
    return 0.5 * (a + a.T)


def random_sym_tensor(rng, spd=False):
    """Random 4th-order tensor with the required index symmetries.

    Built from a random symmetric 3x3 matrix in the orthonormal basis of
    symmetric 2x2 matrices; spd=True shifts the spectrum positive.
    """
    from tvsim.tensors import onb_matrix_to_tensor
    m = rng.standard_normal((3, 3))
    m = 0.5 * (m + m.T)
    if spd:
        m = m @ m.T + 0.1 * np.eye(3)
    return onb_matrix_to_tensor(m)


def boundary_vanishing_field(grid, rng, ncomp=2):
    if ncomp == 2:
        w = np.zeros((grid.ny, grid.nx, 2))
        w[1:-1, 1:-1, :] = rng.standard_normal((grid.ny - 2, grid.nx - 2, 2))
    else:
        w = np.zeros((grid.ny, grid.nx))
        w[1:-1, 1:-1] = rng.standard_normal((grid.ny - 2, grid.nx - 2))
    return w
