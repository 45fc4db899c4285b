"""
Time integration of u_tt - L_h u + b u_t + m u = f(u) (+ optional forcing).

The first-order system (u, v = u_t) is advanced with the classical
four-stage Runge-Kutta scheme. Its stability interval on the imaginary
axis is |z| <= 2*sqrt(2), hence the CFL constant 2.8 against the spectral
bound of -L_h. Blow-up is followed by halving the step whenever
dt * growth_rate exceeds the growth tolerance, and stopped at the linf
threshold, where the time is extrapolated from the tail of the trace.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from app.models.errors import EstimationUnavailable, InputError, NumericalAbort
from app.models.functionals import Trace, TraceRecorder
from app.models.grid import BoxGrid, Field, linf_norm
from app.models.nonlinearity import F_eval, NonlinearSpec, PhysParams, f_eval, growth_rate
from app.models.subop import spectral_bound, sublaplacian_values

logger = logging.getLogger(__name__)

__all__ = [
    "PhysParams", "NonlinearSpec", "f_eval", "F_eval", "State", "RunStatus", "RunSetup",
    "acceleration", "stable_time_step", "step", "run", "estimate_blowup_time", "check_box_sizing",
]

CFL_CONSTANT = 2.8
RUN_TAGS = ("running", "completed", "blowup_detected", "nonfinite_abort")

Forcing = Callable[[float], np.ndarray]


@dataclass
class State:
    u: Field
    v: Field
    tau: float = 0.0

    def __post_init__(self):
        if self.u.grid != self.v.grid:
            raise InputError("u and v must live on the same grid")
        if not self.tau >= 0:
            raise InputError(f"simulation time must be nonnegative, got {self.tau}")

    @property
    def grid(self) -> BoxGrid:
        return self.u.grid


@dataclass
class RunStatus:
    tag: str = "running"
    tau_stop: float = 0.0
    blowup_estimate: Optional[float] = None
    tau_detect: Optional[float] = None
    steps: int = 0
    halvings: int = 0
    dt_initial: float = math.nan
    dt_final: float = math.nan
    message: str = ""
    final_state: Optional[State] = field(default=None, repr=False)


def _acceleration_values(u: np.ndarray, v: np.ndarray, tau: float, grid: BoxGrid, params: PhysParams,
                         spec: NonlinearSpec, forcing: Optional[Forcing]) -> np.ndarray:
    acc = sublaplacian_values(u, grid) - params.m * u - params.b * v + f_eval(spec, u)
    if forcing is not None:
        acc = acc + forcing(tau)
    return acc


def acceleration(state: State, params: PhysParams, spec: NonlinearSpec,
                 forcing: Optional[Forcing] = None) -> Field:
    """L_h u - m u - b v + f(u) + S(tau); check `.is_finite` on the result."""
    values = _acceleration_values(state.u.values, state.v.values, state.tau, state.grid,
                                  params, spec, forcing)
    return state.u.with_values(values)


def stable_time_step(grid: BoxGrid, params: PhysParams, cfl_fraction: float = 0.5) -> float:
    if not 0 < cfl_fraction <= 1:
        raise InputError(f"cfl_fraction must lie in (0, 1], got {cfl_fraction}")
    return cfl_fraction * CFL_CONSTANT / math.sqrt(spectral_bound(grid) + params.m)


def step(state: State, dt: float, params: PhysParams, spec: NonlinearSpec,
         forcing: Optional[Forcing] = None, dt_max: Optional[float] = None) -> State:
    if not dt > 0:
        raise InputError(f"time step must be positive, got {dt}")
    if dt_max is not None and dt > dt_max * (1.0 + 1e-12):
        raise InputError(f"time step {dt:.6g} exceeds the stability limit {dt_max:.6g}")
    grid = state.grid
    u, v, tau = state.u.values, state.v.values, state.tau

    def rhs(uu, vv, tt):
        return vv, _acceleration_values(uu, vv, tt, grid, params, spec, forcing)

    half = 0.5 * dt
    k1u, k1v = rhs(u, v, tau)
    k2u, k2v = rhs(u + half * k1u, v + half * k1v, tau + half)
    k3u, k3v = rhs(u + half * k2u, v + half * k2v, tau + half)
    k4u, k4v = rhs(u + dt * k3u, v + dt * k3v, tau + dt)
    u_new = u + (dt / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
    v_new = v + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)

    if not (np.all(np.isfinite(u_new)) and np.all(np.isfinite(v_new))):
        raise NumericalAbort(f"non-finite values after step at tau={tau + dt:.6g}")
    return State(state.u.with_values(u_new), state.v.with_values(v_new), tau + dt)


@dataclass
class RunSetup:
    grid: BoxGrid
    params: PhysParams
    spec: NonlinearSpec
    u0: Field
    u1: Field
    t_end: float
    cfl_fraction: float = 0.5
    output_every: int = 1
    linf_threshold: float = 1e6
    fit_window: int = 20
    growth_tolerance: float = 0.05
    max_halvings: int = 20
    T0: Optional[float] = None
    forcing: Optional[Forcing] = None
    support_radius: Optional[float] = None
    s_support: Optional[float] = None
    config: str = ""

    def __post_init__(self):
        errors = []
        if self.u0.grid != self.grid or self.u1.grid != self.grid:
            errors.append("initial data must live on the run grid")
        if not self.t_end >= 0:
            errors.append(f"t_end must be >= 0 (got {self.t_end})")
        if not 0 < self.cfl_fraction <= 1:
            errors.append(f"cfl_fraction must lie in (0, 1] (got {self.cfl_fraction})")
        if self.output_every < 1:
            errors.append(f"output_every must be >= 1 (got {self.output_every})")
        if not self.linf_threshold > 0:
            errors.append(f"linf_threshold must be positive (got {self.linf_threshold})")
        if self.fit_window < 8:
            errors.append(f"fit_window must be >= 8 (got {self.fit_window})")
        if not self.growth_tolerance > 0:
            errors.append(f"growth_tolerance must be positive (got {self.growth_tolerance})")
        if self.max_halvings < 0:
            errors.append(f"max_halvings must be >= 0 (got {self.max_halvings})")
        if errors:
            raise InputError("; ".join(errors))


def check_box_sizing(grid: BoxGrid, support_radius: float, s_support: float, t_end: float) -> List[str]:
    """Finite-speed heuristic: the truncation should not be felt before t_end."""
    violations = []
    if grid.L_xy < support_radius + t_end:
        violations.append(f"L_xy={grid.L_xy} < support radius {support_radius} + t_end {t_end}")
    y_max = grid.L_xy - 0.5 * grid.h_y
    needed = s_support + 4.0 * y_max * t_end
    if grid.L_s < needed:
        violations.append(f"L_s={grid.L_s} < s-support {s_support} + 4 max|y| t_end = {needed:.6g}")
    return violations


def estimate_blowup_time(taus, linf, p: float, window: int = 20) -> float:
    """Zero crossing of a least-squares line through linf^(-(p-1)/2) over the tail.

    Matches the scalar profile u ~ C (T - tau)^(-2/(p-1)).
    """
    taus = np.asarray(taus, dtype=float)[-window:]
    linf = np.asarray(linf, dtype=float)[-window:]
    if taus.size < 8:
        raise EstimationUnavailable(f"need at least 8 tail samples, got {taus.size}")
    if np.any(linf <= 0) or np.any(np.diff(linf) <= 0):
        raise EstimationUnavailable("tail of linf is not strictly increasing")
    y = linf ** (-(p - 1.0) / 2.0)
    slope, intercept = np.polyfit(taus, y, 1)
    if not slope < 0:
        raise EstimationUnavailable(f"fitted slope {slope:.3e} is not negative")
    estimate = -intercept / slope
    if not (math.isfinite(estimate) and estimate > 0):
        raise EstimationUnavailable(f"fitted blow-up time {estimate} is not positive")
    return float(estimate)


def run(setup: RunSetup) -> Tuple[Trace, RunStatus]:
    """Integrate to t_end, the linf threshold, or the first non-finite value."""
    trace = Trace(setup.params, setup.spec, T0=setup.T0, config=setup.config)
    status = RunStatus()
    trace.status = status
    if setup.t_end == 0:
        status.tag = "completed"
        status.final_state = State(setup.u0.copy(), setup.u1.copy(), 0.0)
        return trace, status

    params, spec = setup.params, setup.spec
    if setup.support_radius is not None and params.theorem_mode:
        s_support = setup.s_support if setup.s_support is not None else setup.support_radius
        for violation in check_box_sizing(setup.grid, setup.support_radius, s_support, setup.t_end):
            logger.warning("box sizing: %s", violation)

    dt_max = stable_time_step(setup.grid, params, setup.cfl_fraction)
    dt = dt_max
    while dt * growth_rate(spec, linf_norm(setup.u0)) > setup.growth_tolerance \
            and status.halvings < setup.max_halvings:
        dt *= 0.5
        status.halvings += 1
    status.dt_initial = dt
    logger.info("integrating to t_end=%g with dt=%.6g (stability limit %.6g)", setup.t_end, dt, dt_max)

    recorder = TraceRecorder(trace)
    state = State(setup.u0.copy(), setup.u1.copy(), 0.0)
    recorder.record(0, 0.0, state.u, state.v)
    detected = False

    while True:
        remaining = setup.t_end - state.tau
        if remaining <= 1e-12 * setup.t_end:
            status.tag = "completed"
            break
        h = min(dt, remaining)
        try:
            state = step(state, h, params, spec, setup.forcing, dt_max=dt_max)
        except NumericalAbort as exc:
            status.tag = "nonfinite_abort"
            status.message = str(exc)
            logger.error("%s", exc)
            break
        status.steps += 1
        linf = linf_norm(state.u)
        at_end = setup.t_end - state.tau <= 1e-12 * setup.t_end

        if linf >= setup.linf_threshold:
            recorder.record(status.steps, state.tau, state.u, state.v)
            status.tag = "blowup_detected"
            break
        if detected or at_end or status.steps % setup.output_every == 0:
            recorder.record(status.steps, state.tau, state.u, state.v)

        rate = growth_rate(spec, linf)
        while dt * rate > setup.growth_tolerance and status.halvings < setup.max_halvings:
            dt *= 0.5
            status.halvings += 1
            if not detected:
                detected = True
                status.tau_detect = state.tau
                logger.warning("blow-up suspected at tau=%.6g (linf=%.6g); halving dt", state.tau, linf)

    status.tau_stop = state.tau
    status.dt_final = dt
    status.final_state = state
    if status.tag == "blowup_detected":
        try:
            status.blowup_estimate = estimate_blowup_time(
                trace.taus, trace.column("linf_u"), spec.profile_exponent, setup.fit_window)
        except EstimationUnavailable as exc:
            status.message = f"blow-up time estimation unavailable: {exc}"
            logger.warning("%s", status.message)
        logger.info("blow-up detected at tau=%.6g, estimate %s", state.tau, status.blowup_estimate)
    return trace, status
