import pytest
import sys
import os
import numpy as np

# Add parent directory to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.models.grid import BoxGrid, Field
from app.models.hgroup import GaussianBump
from app.models.nonlinearity import NonlinearSpec, PhysParams
from app.models.subop import sublaplacian_values


@pytest.fixture
def rng():
    """Seeded generator so every test sees the same random data."""
    return np.random.default_rng(20240607)


@pytest.fixture
def small_grid():
    return BoxGrid(n=1, N_x=9, N_y=9, N_s=9, L_xy=3.0, L_s=6.0, bc="dirichlet")


@pytest.fixture(params=["dirichlet", "periodic", "mixed"])
def any_bc_grid(request):
    return BoxGrid(n=1, N_x=7, N_y=6, N_s=5, L_xy=2.0, L_s=3.0, bc=request.param)


@pytest.fixture
def theorem_params():
    return PhysParams(b=1.0, m=1.0)


@pytest.fixture
def quadratic():
    return NonlinearSpec.power(2.0, 1.0)


@pytest.fixture
def random_field():
    def make(grid, rng):
        return Field(grid, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))
    return make


@pytest.fixture
def gaussian_field():
    def make(grid, width=1.0, amplitude=1.0):
        bump = GaussianBump(np.zeros(grid.ndim), np.full(grid.ndim, width), amplitude=amplitude)
        return Field.sample(grid, bump)
    return make


def _dense_minus_sublaplacian(grid):
    """Matrix of -L_h in C order, built column by column from unit vectors."""
    size = grid.size
    matrix = np.zeros((size, size), dtype=complex)
    for k in range(size):
        e = np.zeros(size, dtype=complex)
        e[k] = 1.0
        matrix[:, k] = -sublaplacian_values(e.reshape(grid.shape), grid).ravel()
    return matrix


@pytest.fixture
def dense_operator():
    """Dense -L_h for small grids; the weighted pairing is h_vol times the plain dot product."""
    return _dense_minus_sublaplacian


@pytest.fixture
def write_config(tmp_path):
    """Write `key = value` text to a file and return its path; output.dir points into tmp_path."""
    def write(text, name="run.cfg", output=True):
        body = text
        if output and "output.dir" not in text:
            body = text + f"\noutput.dir = {tmp_path / 'out'}\n"
        path = tmp_path / name
        path.write_text(body)
        return path
    return write
