import pytest
import sys
import os
import math
import numpy as np

# Add parent directory to path for imports
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.models.dynamics import (F_eval, NonlinearSpec, PhysParams, RunSetup, State, acceleration,
                                 check_box_sizing, estimate_blowup_time, f_eval, run,
                                 stable_time_step, step)
from app.models.errors import EstimationUnavailable, HypothesisError, InputError, NumericalAbort
from app.models.grid import BoxGrid, Field
from app.models.hgroup import GaussianBump
from app.models.oracle import eigenmode, manufactured_case, scalar_solve


def constant_state(grid, u, v=0.0):
    return State(Field.constant(grid, u), Field.constant(grid, v), 0.0)


class TestNonlinearity:
    def test_power_examples(self):
        spec = NonlinearSpec.power(3.0, 2.0)
        assert f_eval(spec, 2.0) == pytest.approx(16.0)
        assert F_eval(spec, 2.0) == pytest.approx(8.0)
        assert f_eval(spec, 0.0) == 0
        assert f_eval(NonlinearSpec.power(2.0, 1.0), 1j) == pytest.approx(1j)

    def test_growth_identity(self, rng):
        spec = NonlinearSpec.power(2.5, 0.7)
        z = rng.standard_normal(50) + 1j * rng.standard_normal(50)
        lhs = np.real(f_eval(spec, z) * np.conj(z))
        np.testing.assert_allclose(lhs, spec.alpha * F_eval(spec, z), rtol=1e-12)

    def test_invalid_power(self):
        with pytest.raises(InputError):
            NonlinearSpec.power(1.0)
        with pytest.raises(InputError):
            NonlinearSpec.power(3.0, -1.0)

    def test_custom_violating_growth_condition(self):
        with pytest.raises(HypothesisError):
            NonlinearSpec.custom(lambda z: z, lambda z: 0.5 * np.abs(z) ** 2, alpha=4.0)

    def test_custom_with_small_alpha(self):
        with pytest.raises(HypothesisError):
            NonlinearSpec.custom(lambda z: np.abs(z) * z, lambda z: np.abs(z) ** 3 / 3.0, alpha=2.0)

    def test_custom_non_finite_output(self):
        spec = NonlinearSpec.custom(lambda z: np.where(np.abs(z) > 10, np.inf, np.abs(z) ** 2 * z),
                                    lambda z: np.abs(z) ** 4 / 4.0, alpha=4.0,
                                    samples=np.array([0.5, 1.0, 2.0j]))
        grid = BoxGrid(n=1, N_x=4, N_y=4, N_s=4, bc="periodic")
        with pytest.raises(NumericalAbort):
            acceleration(constant_state(grid, 20.0), PhysParams(b=1.0, m=1.0), spec)

    def test_params_validation(self):
        with pytest.raises(InputError):
            PhysParams(b=-1.0, m=1.0)
        assert PhysParams(b=1.0, m=1.0).theorem_mode
        assert not PhysParams(b=0.0, m=1.0).theorem_mode


class TestStep:
    def setup_method(self):
        self.grid = BoxGrid(n=1, N_x=6, N_y=6, N_s=6, L_xy=2.0, L_s=4.0, bc="periodic")
        self.params = PhysParams(b=0.0, m=1.0)
        self.spec = NonlinearSpec.power(2.0, 1.0)

    def test_acceleration_of_constant(self):
        acc = acceleration(constant_state(self.grid, 2.0), self.params, self.spec)
        np.testing.assert_allclose(acc.values, 2.0 ** 2 - 2.0, rtol=1e-14)

    def test_zero_stays_zero(self):
        state = constant_state(self.grid, 0.0)
        dt = stable_time_step(self.grid, self.params)
        for _ in range(5):
            state = step(state, dt, self.params, self.spec)
        assert np.all(state.u.values == 0)
        assert np.all(state.v.values == 0)
        assert state.tau == pytest.approx(5 * dt)

    def test_step_beyond_stability_limit_rejected(self):
        dt_max = stable_time_step(self.grid, self.params)
        with pytest.raises(InputError):
            step(constant_state(self.grid, 1.0), 2.0 * dt_max, self.params, self.spec, dt_max=dt_max)
        with pytest.raises(InputError):
            step(constant_state(self.grid, 1.0), 0.0, self.params, self.spec)

    def test_stable_time_step_bounds(self):
        assert stable_time_step(self.grid, self.params, 0.25) == pytest.approx(
            0.5 * stable_time_step(self.grid, self.params, 0.5))
        with pytest.raises(InputError):
            stable_time_step(self.grid, self.params, 1.5)

    def test_state_validation(self):
        other = BoxGrid(n=1, N_x=5, N_y=6, N_s=6, L_xy=2.0, L_s=4.0, bc="periodic")
        with pytest.raises(InputError):
            State(Field.zeros(self.grid), Field.zeros(other))
        with pytest.raises(InputError):
            State(Field.zeros(self.grid), Field.zeros(self.grid), -1.0)

    def test_eigenmode_oscillates_at_discrete_frequency(self):
        grid = BoxGrid(n=1, N_x=9, N_y=9, N_s=4, L_xy=3.0, L_s=2.0, bc="mixed")
        params, spec = PhysParams(b=0.0, m=1.0), NonlinearSpec.power(3.0, 0.0)
        mode, omega = eigenmode(grid, (1, 0), params.m)
        state = State(mode, Field.zeros(grid), 0.0)
        dt = 0.5 * stable_time_step(grid, params)
        steps = int(math.ceil(1.0 / dt))
        dt = 1.0 / steps
        for _ in range(steps):
            state = step(state, dt, params, spec)
        expected = mode.values * math.cos(omega * state.tau)
        assert np.max(np.abs(state.u.values - expected)) <= 1e-6


class TestBlowupEstimate:
    def test_exact_profile(self):
        taus = np.linspace(0.0, 0.9, 20)
        assert estimate_blowup_time(taus, 1.0 / (1.0 - taus), 3.0) == pytest.approx(1.0, rel=1e-6)

    def test_quadratic_profile(self):
        taus = np.linspace(0.5, 1.4, 30)
        linf = 6.0 / (1.5 - taus) ** 2
        assert estimate_blowup_time(taus, linf, 2.0, window=20) == pytest.approx(1.5, rel=1e-6)

    def test_noisy_profile(self, rng):
        taus = np.linspace(0.0, 0.9, 20)
        linf = (1.0 - taus) ** -2 * (1.0 + 0.01 * rng.standard_normal(20))
        assert estimate_blowup_time(taus, linf, 2.0) == pytest.approx(1.0, rel=0.02)

    def test_constant_tail_unavailable(self):
        with pytest.raises(EstimationUnavailable):
            estimate_blowup_time(np.linspace(0.0, 1.0, 20), np.ones(20), 3.0)

    def test_too_few_samples(self):
        taus = np.linspace(0.0, 0.5, 5)
        with pytest.raises(EstimationUnavailable):
            estimate_blowup_time(taus, 1.0 / (1.0 - taus), 3.0)


class TestBoxSizing:
    def test_large_box_passes(self):
        grid = BoxGrid(n=1, N_x=9, N_y=9, N_s=9, L_xy=6.0, L_s=12.0)
        assert check_box_sizing(grid, 3.0, 3.0, 0.05) == []

    def test_s_extent_too_small(self):
        grid = BoxGrid(n=1, N_x=9, N_y=9, N_s=9, L_xy=6.0, L_s=12.0)
        violations = check_box_sizing(grid, 3.0, 3.0, 2.0)
        assert len(violations) == 1
        assert violations[0].startswith("L_s=")

    def test_both_too_small(self):
        grid = BoxGrid(n=1, N_x=9, N_y=9, N_s=9, L_xy=2.0, L_s=2.0)
        assert len(check_box_sizing(grid, 3.0, 3.0, 1.0)) == 2


class TestRun:
    def setup_method(self):
        self.grid = BoxGrid(n=1, N_x=9, N_y=9, N_s=9, L_xy=4.0, L_s=8.0)
        self.bump = Field.sample(self.grid, GaussianBump(np.zeros(3), np.full(3, 1.5)))

    def make_setup(self, **kwargs):
        options = dict(grid=self.grid, params=PhysParams(b=0.0, m=1.0), spec=NonlinearSpec.power(3.0, 0.0),
                       u0=self.bump, u1=Field.zeros(self.grid), t_end=0.5)
        options.update(kwargs)
        return RunSetup(**options)

    def test_zero_horizon(self):
        trace, status = run(self.make_setup(t_end=0.0))
        assert status.tag == "completed"
        assert status.steps == 0

    def test_linear_run_completes(self):
        trace, status = run(self.make_setup())
        assert status.tag == "completed"
        assert status.tau_stop == pytest.approx(0.5)
        assert trace.taus[0] == 0.0
        assert trace.taus[-1] == pytest.approx(0.5)
        assert status.halvings == 0
        assert status.blowup_estimate is None

    def test_output_every_thins_rows(self):
        every_step, _ = run(self.make_setup())
        thinned, status = run(self.make_setup(output_every=3))
        assert len(thinned) < len(every_step)
        assert thinned.taus[-1] == pytest.approx(0.5)
        assert thinned.rows[1].step == 3

    def test_energy_conserved_without_damping(self):
        grid = BoxGrid(n=1, N_x=17, N_y=17, N_s=32, L_xy=3.0, L_s=2.0, bc="mixed")
        mode, _ = eigenmode(grid, 0)
        setup = self.make_setup(grid=grid, u0=mode, u1=Field.zeros(grid), t_end=1.0)
        assert setup.cfl_fraction == 0.5
        trace, status = run(setup)
        assert status.tag == "completed"
        E = trace.column("E")
        assert np.max(np.abs(E - E[0])) / abs(E[0]) <= 1e-8

    def test_energy_drift_shrinks_with_step(self):
        trace, _ = run(self.make_setup(t_end=1.0))
        coarse = trace.column("E")
        trace, _ = run(self.make_setup(t_end=1.0, cfl_fraction=0.25))
        fine = trace.column("E")
        coarse_drift = abs(coarse[-1] - coarse[0])
        assert abs(fine[-1] - fine[0]) < coarse_drift / 16.0

    def test_deterministic(self):
        setup = self.make_setup(spec=NonlinearSpec.power(3.0, 1.0), u1=self.bump)
        first, _ = run(setup)
        second, _ = run(setup)
        for name in ("l2_u_sq", "E", "A", "linf_u"):
            np.testing.assert_array_equal(first.column(name), second.column(name))

    def test_setup_collects_errors(self):
        with pytest.raises(InputError) as excinfo:
            self.make_setup(cfl_fraction=0.0, output_every=0)
        assert "cfl_fraction" in str(excinfo.value)
        assert "output_every" in str(excinfo.value)

    def test_setup_rejects_foreign_data(self):
        other = BoxGrid(n=1, N_x=5, N_y=5, N_s=5)
        with pytest.raises(InputError):
            self.make_setup(u1=Field.zeros(other))


class TestForcedRun:
    def test_manufactured_solution_second_order(self):
        params, spec = PhysParams(b=0.5, m=1.0), NonlinearSpec.power(3.0, 1.0)
        spacings, errors = [], []
        for N in (17, 33, 65):
            grid = BoxGrid(n=1, N_x=N, N_y=N, N_s=N)
            case = manufactured_case("gaussian_cos", grid, params, spec)
            start = case.exact_state(0.0)
            _, status = run(RunSetup(grid=grid, params=params, spec=spec, u0=start.u, u1=start.v,
                                     t_end=0.5, forcing=case.forcing))
            assert status.tag == "completed"
            final = status.final_state
            assert final.tau == pytest.approx(0.5)
            exact = case.exact_state(final.tau)
            spacings.append(grid.h_x)
            errors.append(np.max(np.abs(final.u.values - exact.u.values)))
        assert errors[0] > errors[1] > errors[2]
        order = np.polyfit(np.log(spacings), np.log(errors), 1)[0]
        assert 1.7 <= order <= 2.3

    def test_final_state_of_zero_horizon(self):
        grid = BoxGrid(n=1, N_x=5, N_y=5, N_s=5)
        u0 = Field.constant(grid, 1.0)
        _, status = run(RunSetup(grid=grid, params=PhysParams(b=1.0, m=1.0), spec=NonlinearSpec.power(3.0),
                                 u0=u0, u1=Field.zeros(grid), t_end=0.0))
        np.testing.assert_array_equal(status.final_state.u.values, u0.values)
        assert status.final_state.tau == 0.0


class TestHomogeneousBlowup:
    def test_matches_scalar_oracle(self):
        grid = BoxGrid(n=1, N_x=4, N_y=4, N_s=4, bc="periodic")
        params, spec = PhysParams(b=1.0, m=1.0), NonlinearSpec.power(3.0, 1.0)
        setup = RunSetup(grid=grid, params=params, spec=spec, u0=Field.constant(grid, 2.0),
                         u1=Field.constant(grid, 2.0), t_end=5.0, growth_tolerance=0.01, max_halvings=30)
        trace, status = run(setup)
        oracle = scalar_solve(2.0, 2.0, 1.0, 1.0, 1.0, 3.0, 5.0)

        assert status.tag == "blowup_detected"
        assert oracle.status == "blowup_detected"
        assert status.tau_detect is not None
        T = oracle.blowup_estimate
        assert status.blowup_estimate == pytest.approx(T, rel=1e-2)

        taus = trace.taus
        window = taus <= 0.95 * T
        expected = np.abs(oracle.at(taus[window]))
        np.testing.assert_allclose(trace.column("linf_u")[window], expected, rtol=1e-6)

    def test_detection_records_every_step(self):
        grid = BoxGrid(n=1, N_x=4, N_y=4, N_s=4, bc="periodic")
        setup = RunSetup(grid=grid, params=PhysParams(b=1.0, m=1.0), spec=NonlinearSpec.power(3.0, 1.0),
                         u0=Field.constant(grid, 2.0), u1=Field.constant(grid, 2.0), t_end=5.0,
                         output_every=50, max_halvings=30)
        trace, status = run(setup)
        assert status.tag == "blowup_detected"
        steps = np.array([row.step for row in trace.rows if row.tau > status.tau_detect])
        assert np.all(np.diff(steps) == 1)
        assert trace.rows[-1].linf_u >= setup.linf_threshold
