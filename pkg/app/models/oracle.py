"""
Independent ground truth for the integrator.

- scalar_solve: the spatially constant problem u'' + b u' + m u = kappa |u|^(p-1) u,
  integrated with scipy's DOP853 pair and event-based blow-up detection.
- eigenmode: s-independent products of the exact eigenvectors of the
  one-dimensional SBP second difference (zero ghost cells).
- manufactured cases: closed forms turned into exact solutions by a forcing
  term built from the analytic 2-jet.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import solve_ivp

from app.models.dynamics import State, acceleration, estimate_blowup_time
from app.models.errors import EstimationUnavailable, InputError
from app.models.grid import BoxGrid, Field, linf_norm
from app.models.hgroup import GaussianBump, TestFunction, sublaplacian_from_jet
from app.models.nonlinearity import NonlinearSpec, PhysParams, f_eval
from config.settings import Config

logger = logging.getLogger(__name__)

DETECTION_LEVEL = 1e6
FIT_SAMPLES = 20
SCALAR_ATOL = 1e-12


@dataclass
class ScalarTrace:
    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    status: str
    nfev: int = 0
    blowup_estimate: Optional[float] = None
    message: str = ""
    solution: Optional[Callable] = field(default=None, repr=False)

    def at(self, tau) -> np.ndarray:
        """u at arbitrary times inside the integrated window."""
        tau = np.asarray(tau, dtype=float)
        if self.solution is None:
            return np.interp(tau, self.t, self.u)
        return self.solution(tau)[0]


def _crossing(level: float, terminal: bool):
    def event(t, y):
        return abs(y[0]) - level
    event.terminal = terminal
    event.direction = 1
    return event


def scalar_solve(u0: float, u1: float, b: float, m: float, kappa: float, p: float, t_end: float,
                 rtol: Optional[float] = None, threshold: Optional[float] = None) -> ScalarTrace:
    values = (u0, u1, b, m, kappa, p, t_end)
    if not all(math.isfinite(x) for x in values):
        raise InputError(f"scalar oracle needs finite inputs, got {values}")
    if not p > 1:
        raise InputError(f"power exponent must exceed 1, got p={p}")
    if t_end < 0:
        raise InputError(f"t_end must be >= 0, got {t_end}")
    rtol = Config.ORACLE_RTOL if rtol is None else rtol
    threshold = Config.ORACLE_BLOWUP_THRESHOLD if threshold is None else threshold

    if t_end == 0:
        return ScalarTrace(np.zeros(1), np.array([float(u0)]), np.array([float(u1)]), "completed")

    def rhs(t, y):
        u, v = y
        return [v, -b * v - m * u + kappa * abs(u) ** (p - 1.0) * u]

    sol = solve_ivp(rhs, (0.0, t_end), [float(u0), float(u1)], method="DOP853", rtol=rtol,
                    atol=SCALAR_ATOL, dense_output=True,
                    events=(_crossing(DETECTION_LEVEL, False), _crossing(threshold, True)))

    trace = ScalarTrace(t=sol.t, u=sol.y[0], v=sol.y[1], status="completed", nfev=sol.nfev,
                        message=sol.message, solution=sol.sol)
    if sol.status == -1:
        trace.status = "step_underflow"
        logger.warning("scalar oracle aborted at t=%.6g: %s", sol.t[-1], sol.message)
    elif sol.status == 1:
        trace.status = "blowup_detected"
        t_stop = sol.t_events[1][0]
        t_onset = sol.t_events[0][0] if sol.t_events[0].size else sol.t[0]
        taus = np.linspace(t_onset, t_stop, FIT_SAMPLES)
        try:
            trace.blowup_estimate = estimate_blowup_time(taus, np.abs(sol.sol(taus)[0]), p, FIT_SAMPLES)
        except EstimationUnavailable as exc:
            trace.message = f"blow-up time estimation unavailable: {exc}"
            logger.warning("%s", trace.message)
    return trace


def _mode_numbers(grid: BoxGrid, k: Union[int, Sequence[int]]) -> Tuple[int, ...]:
    horizontal = 2 * grid.n
    modes = (int(k),) * horizontal if np.isscalar(k) else tuple(int(x) for x in k)
    if len(modes) != horizontal:
        raise InputError(f"need {horizontal} mode indices, got {len(modes)}")
    for axis, mode in enumerate(modes):
        if not 0 <= mode < grid.shape[axis]:
            raise InputError(f"mode index {mode} out of range on axis {axis} (size {grid.shape[axis]})")
    return modes


def _mode_angle(grid: BoxGrid, axis: int, mode: int) -> float:
    N = grid.shape[axis]
    return math.pi * (2 * mode + 1) / (2 * N + 1)


def mode_eigenvalue(grid: BoxGrid, k: Union[int, Sequence[int]]) -> float:
    """lambda_h = sum over horizontal axes of (4/h^2) sin^2(theta/2)."""
    modes = _mode_numbers(grid, k)
    return sum(4.0 / grid.spacing(a) ** 2 * math.sin(0.5 * _mode_angle(grid, a, mode)) ** 2
               for a, mode in enumerate(modes))


def continuum_frequency(grid: BoxGrid, k: Union[int, Sequence[int]], m: float = 0.0) -> float:
    """sqrt(|k_cont|^2 + m) with k_cont = theta / h on every horizontal axis."""
    modes = _mode_numbers(grid, k)
    k_sq = sum((_mode_angle(grid, a, mode) / grid.spacing(a)) ** 2 for a, mode in enumerate(modes))
    return math.sqrt(k_sq + m)


def eigenmode(grid: BoxGrid, k: Union[int, Sequence[int]], m: float = 0.0) -> Tuple[Field, float]:
    """Product of cos(theta (j + 1/2)) over the horizontal axes, constant along s.

    theta = pi (2k + 1) / (2N + 1) makes the ghost at j = N vanish and the ghost
    of the forward difference at j = -1 mirror j = 0, matching the zero-ghost
    stencils. Returns the field and omega_h = sqrt(lambda_h + m).
    """
    if grid.bc != "mixed":
        raise InputError(f"eigenmodes need bc='mixed' (periodic in s), got {grid.bc!r}")
    if m < 0:
        raise InputError(f"mass must be nonnegative, got m={m}")
    modes = _mode_numbers(grid, k)
    values = np.ones(grid.shape)
    for axis, mode in enumerate(modes):
        shape = [1] * grid.ndim
        shape[axis] = grid.shape[axis]
        j = np.arange(grid.shape[axis]) + 0.5
        values = values * np.cos(_mode_angle(grid, axis, mode) * j).reshape(shape)
    return Field(grid, values), math.sqrt(mode_eigenvalue(grid, modes) + m)


MANUFACTURED_CASES = ("gaussian_cos", "zero")


class ManufacturedCase:
    """u(z, tau) = P(z) cos(tau) made exact by S = u_tt - L u + b u_t + m u - f(u)."""

    def __init__(self, name: str, grid: BoxGrid, params: PhysParams, spec: NonlinearSpec,
                 profile: Optional[TestFunction] = None):
        self.name = name
        self.grid = grid
        self.params = params
        self.spec = spec
        if profile is None:
            self.profile = np.zeros(grid.shape, dtype=complex)
            self.profile_lap = np.zeros(grid.shape, dtype=complex)
        else:
            z = grid.points()
            jet = profile.jet(z)
            self.profile = np.asarray(jet.value, dtype=complex)
            self.profile_lap = sublaplacian_from_jet(jet, z)

    def exact_state(self, tau: float) -> State:
        u = Field(self.grid, self.profile * math.cos(tau))
        v = Field(self.grid, -self.profile * math.sin(tau))
        return State(u, v, tau)

    def acceleration_exact(self, tau: float) -> Field:
        return Field(self.grid, -self.profile * math.cos(tau))

    def forcing(self, tau: float) -> np.ndarray:
        c, s = math.cos(tau), math.sin(tau)
        b, m = self.params.b, self.params.m
        return ((m - 1.0) * c * self.profile - c * self.profile_lap - b * s * self.profile
                - f_eval(self.spec, self.profile * c))

    def residual(self, tau: float) -> float:
        """max |acceleration(exact state) - u_tt| on the grid."""
        acc = acceleration(self.exact_state(tau), self.params, self.spec, self.forcing)
        return linf_norm(acc.with_values(acc.values - self.acceleration_exact(tau).values))


def manufactured_case(name: str, grid: BoxGrid, params: PhysParams, spec: NonlinearSpec) -> ManufacturedCase:
    if name == "gaussian_cos":
        widths = np.full(grid.ndim, 1.5)
        widths[grid.s_axis] = 3.0
        return ManufacturedCase(name, grid, params, spec, GaussianBump(np.zeros(grid.ndim), widths))
    if name == "zero":
        return ManufacturedCase(name, grid, params, spec)
    raise InputError(f"unknown manufactured case {name!r}; known: {', '.join(MANUFACTURED_CASES)}")


@dataclass
class ConvergenceResult:
    levels: List[int]
    spacings: List[float]
    errors: List[float]
    order: float

    def table(self) -> str:
        lines = [f"{'N':>6} {'h':>12} {'max residual':>14}"]
        for N, h, err in zip(self.levels, self.spacings, self.errors):
            lines.append(f"{N:>6} {h:>12.6g} {err:>14.6e}")
        lines.append(f"observed order: {self.order:.4f}")
        return "\n".join(lines)


def convergence_study(levels: Sequence[int], kappa: float = 1.0, p: float = 3.0, b: float = 0.5,
                      m: float = 1.0, tau: float = 0.3, case: str = "gaussian_cos",
                      bc: str = "dirichlet", L_xy: float = 6.0, L_s: float = 12.0,
                      n: int = 1) -> ConvergenceResult:
    """Max-norm residual of the manufactured solution on N^(2n+1) grids, order by log-log fit."""
    levels = [int(N) for N in levels]
    if len(levels) < 3:
        raise InputError(f"a convergence study needs at least 3 levels, got {len(levels)}")
    if len(set(levels)) != len(levels):
        raise InputError(f"convergence levels must be distinct, got {levels}")
    params = PhysParams(b=b, m=m)
    spec = NonlinearSpec.power(p, kappa)

    spacings, errors = [], []
    for N in levels:
        grid = BoxGrid(n=n, N_x=N, N_y=N, N_s=N, L_xy=L_xy, L_s=L_s, bc=bc)
        err = manufactured_case(case, grid, params, spec).residual(tau)
        spacings.append(grid.h_x)
        errors.append(err)
        logger.info("level N=%d h=%.6g residual=%.6e", N, grid.h_x, err)

    if min(errors) <= 0:
        logger.warning("zero residual on some level; observed order is undefined")
        order = math.nan
    else:
        order = float(np.polyfit(np.log(spacings), np.log(errors), 1)[0])
    return ConvergenceResult(levels, spacings, errors, order)
