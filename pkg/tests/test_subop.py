import pytest
import sys
import os
import numpy as np

# Add parent directory to path for imports
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.models.errors import InputError
from app.models.grid import BoxGrid, Field, inner, l2_norm_sq
from app.models.hgroup import GaussianBump, Monomial, sublaplacian_from_jet
from app.models.subop import (closed_form_bound, grad_h, power_iteration, sbp_defect, spectral_bound,
                              sublaplacian, sublaplacian_values, x_backward, x_forward, y_forward)


def interior(values):
    return values[1:-1, 1:-1, 1:-1]


class TestHorizontalFields:
    def setup_method(self):
        self.grid = BoxGrid(n=1, N_x=8, N_y=8, N_s=8, L_xy=2.0, L_s=3.0, bc="dirichlet")

    def test_zero_field(self):
        zero = Field.zeros(self.grid)
        assert np.all(x_forward(0, zero).values == 0)
        assert np.all(y_forward(0, zero).values == 0)
        assert np.all(sublaplacian(zero).values == 0)

    def test_linear_in_x(self):
        u = Field.sample(self.grid, Monomial([1, 0, 0]))
        np.testing.assert_allclose(interior(x_forward(0, u).values), 1.0, rtol=1e-12)

    def test_linear_in_s(self):
        u = Field.sample(self.grid, Monomial([0, 0, 1]))
        y = self.grid.coordinate_array(1) * np.ones(self.grid.shape)
        x = self.grid.coordinate_array(0) * np.ones(self.grid.shape)
        np.testing.assert_allclose(interior(x_forward(0, u).values), interior(2.0 * y), atol=1e-12)
        np.testing.assert_allclose(interior(y_forward(0, u).values), interior(-2.0 * x), atol=1e-12)

    def test_index_out_of_range(self):
        with pytest.raises(InputError):
            x_forward(1, Field.zeros(self.grid))

    def test_gradient_norm_matches_naive_sum(self, rng, random_field):
        u = random_field(self.grid, rng)
        gradient = grad_h(u)
        assert len(gradient.components) == 2
        naive = 0.0
        for component in gradient.components:
            for value in component.values.ravel():
                naive += abs(value) ** 2
        assert gradient.norm_sq() == pytest.approx(naive * self.grid.h_vol, rel=1e-12)

    def test_backward_is_minus_adjoint_of_forward(self, any_bc_grid, rng, random_field):
        u, v = random_field(any_bc_grid, rng), random_field(any_bc_grid, rng)
        lhs = inner(x_forward(0, u), v)
        rhs = -inner(u, x_backward(0, v))
        assert abs(lhs - rhs) <= 1e-12 * (1.0 + abs(lhs))


class TestSummationByParts:
    def test_sbp_identity_on_random_fields(self, rng, random_field):
        grid = BoxGrid(n=1, N_x=17, N_y=17, N_s=17, bc="dirichlet")
        bound = spectral_bound(grid)
        for _ in range(200):
            u = random_field(grid, rng)
            assert sbp_defect(u) <= 1e-12 * (1.0 + l2_norm_sq(u) * bound)

    def test_sbp_identity_every_boundary_mode(self, any_bc_grid, rng, random_field):
        bound = closed_form_bound(any_bc_grid)
        for _ in range(20):
            u = random_field(any_bc_grid, rng)
            assert sbp_defect(u) <= 1e-12 * (1.0 + l2_norm_sq(u) * bound)

    def test_symmetric_and_nonpositive(self, any_bc_grid, rng, random_field):
        for _ in range(20):
            u, v = random_field(any_bc_grid, rng), random_field(any_bc_grid, rng)
            scale = 1.0 + closed_form_bound(any_bc_grid) * np.sqrt(l2_norm_sq(u) * l2_norm_sq(v))
            assert abs(inner(sublaplacian(u), v) - inner(u, sublaplacian(v))) <= 1e-12 * scale
            assert inner(sublaplacian(u), u).real <= 1e-12 * scale

    def test_dense_matrix_is_hermitian_psd(self, any_bc_grid, dense_operator):
        matrix = dense_operator(any_bc_grid)
        np.testing.assert_allclose(matrix, matrix.conj().T, atol=1e-10)
        assert np.linalg.eigvalsh(matrix).min() >= -1e-10

    def test_periodic_constant_is_annihilated(self):
        grid = BoxGrid(n=1, N_x=6, N_y=6, N_s=6, bc="periodic")
        assert np.all(sublaplacian(Field.constant(grid, 3.0 - 1.0j)).values == 0)

    def test_higher_dimension(self, rng, random_field):
        grid = BoxGrid(n=2, N_x=4, N_y=5, N_s=6, L_xy=1.0, L_s=2.0)
        u = random_field(grid, rng)
        assert sbp_defect(u) <= 1e-12 * (1.0 + l2_norm_sq(u) * closed_form_bound(grid))


class TestConsistency:
    def test_second_order_against_jet(self):
        bump = GaussianBump(np.zeros(3), [1.5, 1.5, 3.0])
        spacings, errors = [], []
        for N in (17, 33, 65):
            grid = BoxGrid(n=1, N_x=N, N_y=N, N_s=N, L_xy=6.0, L_s=12.0)
            z = grid.points()
            exact = sublaplacian_from_jet(bump.jet(z), z)
            discrete = sublaplacian_values(bump(z), grid)
            spacings.append(grid.h_x)
            errors.append(np.max(np.abs(discrete - exact)))
        order = np.polyfit(np.log(spacings), np.log(errors), 1)[0]
        assert 1.8 <= order <= 2.2


class TestSpectralBound:
    def test_matches_dense_eigensolve(self, dense_operator):
        grid = BoxGrid(n=1, N_x=5, N_y=5, N_s=5, L_xy=2.0, L_s=4.0)
        lam_max = np.linalg.eigvalsh(dense_operator(grid)).max()
        start = np.random.default_rng(0).standard_normal(grid.shape).astype(complex)
        estimate = power_iteration(lambda a: -sublaplacian_values(a, grid), start, max_iter=5000, tol=1e-10)
        assert estimate.value == pytest.approx(lam_max, rel=0.05)
        assert spectral_bound(grid) >= 0.95 * lam_max

    def test_closed_form_is_an_upper_bound(self, any_bc_grid, dense_operator):
        lam_max = np.linalg.eigvalsh(dense_operator(any_bc_grid)).max()
        assert closed_form_bound(any_bc_grid) >= lam_max * (1.0 - 1e-12)

    def test_monotone_under_halving_h_s(self):
        coarse = BoxGrid(n=1, N_x=5, N_y=5, N_s=5, L_xy=2.0, L_s=4.0)
        fine = BoxGrid(n=1, N_x=5, N_y=5, N_s=10, L_xy=2.0, L_s=4.0)
        values = []
        for grid in (coarse, fine):
            start = np.random.default_rng(1).standard_normal(grid.shape).astype(complex)
            values.append(power_iteration(lambda a, g=grid: -sublaplacian_values(a, g), start,
                                          max_iter=5000, tol=1e-10).value)
        assert values[1] >= values[0]

    def test_zero_start_rejected(self):
        grid = BoxGrid(n=1, N_x=5, N_y=5, N_s=5)
        with pytest.raises(InputError):
            power_iteration(lambda a: -sublaplacian_values(a, grid), np.zeros(grid.shape, dtype=complex))

    def test_bound_is_cached_and_deterministic(self):
        grid = BoxGrid(n=1, N_x=6, N_y=6, N_s=6)
        assert spectral_bound(grid) == spectral_bound(BoxGrid(n=1, N_x=6, N_y=6, N_s=6))
