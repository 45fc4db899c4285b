"""
Scalar functionals along trajectories and the blow-up certificate.

CertificateReport.to_dict() produces a flat document with exactly these keys:
    b, m, alpha, T0, u0_norm_sq, corr, E0, I_u0,
    mu, omega, sigma, corr_threshold,
    alpha_gt_2, nehari_negative, correlation_ok, corr_positive,
    T_star_thm, T_star_M, valid
(T_star_* are None when Re<u0,u1> <= 0.)
"""
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from typing import TYPE_CHECKING, Any, Dict, List, Optional

import numpy as np

from app.models.errors import HypothesisError, InputError, PreparationError
from app.models.grid import BoxGrid, Field, inner, integrate, l2_norm_sq, linf_norm
from app.models.hgroup import GaussianBump
from app.models.nonlinearity import F_eval, NonlinearSpec, PhysParams, f_eval
from app.models.subop import horizontal_components

if TYPE_CHECKING:
    from app.models.dynamics import RunStatus

logger = logging.getLogger(__name__)


def gradh_norm_sq(u: Field) -> float:
    return sum(l2_norm_sq(u.with_values(c)) for c in horizontal_components(u.values, u.grid))


def potential_integral(u: Field, spec: NonlinearSpec) -> float:
    return integrate(u.grid, F_eval(spec, u.values))


def nonlinear_pairing(u: Field, spec: NonlinearSpec) -> float:
    """Re <f(u), u>."""
    return inner(u.with_values(f_eval(spec, u.values)), u).real


def energy_from_parts(l2_u_sq: float, l2_v_sq: float, gradh_sq: float, F_int: float,
                      params: PhysParams) -> float:
    return 0.5 * l2_v_sq + 0.5 * params.m * l2_u_sq + 0.5 * gradh_sq - F_int


def energy(u: Field, v: Field, params: PhysParams, spec: NonlinearSpec) -> float:
    return energy_from_parts(l2_norm_sq(u), l2_norm_sq(v), gradh_norm_sq(u),
                             potential_integral(u, spec), params)


def nehari(u: Field, params: PhysParams, spec: NonlinearSpec) -> float:
    """I(u) = m |u|^2 + |grad_H u|^2 - Re <f(u), u>."""
    return params.m * l2_norm_sq(u) + gradh_norm_sq(u) - nonlinear_pairing(u, spec)


def aux_A(u: Field, v: Field, params: PhysParams) -> float:
    """A = 2 Re <u, v> + b |u|^2."""
    return 2.0 * inner(u, v).real + params.b * l2_norm_sq(u)


@dataclass
class DiagnosticsRow:
    step: int
    tau: float
    l2_u_sq: float
    l2_v_sq: float
    gradh_sq: float
    linf_u: float
    F_int: float
    re_fu_u: float
    re_uv: float
    E: float
    I: float
    A: float
    int_u_sq: float
    int_v_sq: float
    b_int_u: float
    b_int_v: float
    diss_residual: float
    M: float = math.nan


ROW_FIELDS = tuple(f.name for f in fields(DiagnosticsRow))


@dataclass
class Trace:
    params: PhysParams
    spec: NonlinearSpec
    T0: Optional[float] = None
    config: str = ""
    rows: List[DiagnosticsRow] = field(default_factory=list)
    status: Optional["RunStatus"] = None

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        if name not in ROW_FIELDS:
            raise InputError(f"unknown trace column {name!r}")
        return np.array([getattr(row, name) for row in self.rows], dtype=float)

    @property
    def taus(self) -> np.ndarray:
        return self.column("tau")

    def append(self, row: DiagnosticsRow):
        if self.rows and not row.tau > self.rows[-1].tau:
            raise InputError(f"trace times must increase strictly: {row.tau} after {self.rows[-1].tau}")
        self.rows.append(row)


def _cumulative_trapezoid(values: np.ndarray, taus: np.ndarray) -> np.ndarray:
    if values.size == 0:
        return values.copy()
    increments = 0.5 * np.diff(taus) * (values[1:] + values[:-1])
    return np.concatenate([[0.0], np.cumsum(increments)])


class TraceRecorder:
    """Turns states into DiagnosticsRows, accumulating the time integrals by trapezoid."""

    def __init__(self, trace: Trace):
        self.trace = trace

    def record(self, step: int, tau: float, u: Field, v: Field) -> DiagnosticsRow:
        params, spec = self.trace.params, self.trace.spec
        l2_u, l2_v = l2_norm_sq(u), l2_norm_sq(v)
        gradh = gradh_norm_sq(u)
        F_int = potential_integral(u, spec)
        re_fu_u = nonlinear_pairing(u, spec)
        re_uv = inner(u, v).real
        E = energy_from_parts(l2_u, l2_v, gradh, F_int, params)

        if self.trace.rows:
            last = self.trace.rows[-1]
            dt = tau - last.tau
            int_u = last.int_u_sq + 0.5 * dt * (l2_u + last.l2_u_sq)
            int_v = last.int_v_sq + 0.5 * dt * (l2_v + last.l2_v_sq)
            E0, u0_sq = self.trace.rows[0].E, self.trace.rows[0].l2_u_sq
        else:
            int_u = int_v = 0.0
            E0, u0_sq = E, l2_u

        M = math.nan
        T0 = self.trace.T0
        if T0 is not None and tau <= T0:
            M = l2_u + params.b * int_u + params.b * (T0 - tau) * u0_sq

        row = DiagnosticsRow(
            step=step, tau=tau, l2_u_sq=l2_u, l2_v_sq=l2_v, gradh_sq=gradh,
            linf_u=linf_norm(u), F_int=F_int, re_fu_u=re_fu_u, re_uv=re_uv, E=E,
            I=params.m * l2_u + gradh - re_fu_u,
            A=2.0 * re_uv + params.b * l2_u,
            int_u_sq=int_u, int_v_sq=int_v,
            b_int_u=params.b * int_u, b_int_v=params.b * int_v,
            diss_residual=E + params.b * int_v - E0, M=M)
        self.trace.append(row)
        return row


def _row_index(trace: Trace, tau: float) -> int:
    taus = trace.taus
    hits = np.flatnonzero(taus == tau)
    if hits.size == 0:
        raise InputError(f"tau={tau} is not a recorded trace time")
    return int(hits[0])


def aux_M(trace: Trace, tau: float, T0: float) -> float:
    """M = |u|^2 + b int_0^tau |u|^2 + b (T0 - tau) |u0|^2, linear between rows."""
    if len(trace) == 0:
        raise InputError("empty trace")
    taus = trace.taus
    if not 0 <= tau <= T0:
        raise InputError(f"M is defined for 0 <= tau <= T0, got tau={tau}, T0={T0}")
    if tau > taus[-1]:
        raise InputError(f"tau={tau} beyond the last recorded time {taus[-1]}")
    u2 = trace.column("l2_u_sq")
    b = trace.params.b
    M = u2 + b * _cumulative_trapezoid(u2, taus) + b * (T0 - taus) * u2[0]
    return float(np.interp(tau, taus, M))


def dissipation_residual(trace: Trace, tau: float) -> float:
    """R = E(tau) + b int_0^tau |v|^2 - E(0)."""
    k = _row_index(trace, tau)
    E = trace.column("E")
    int_v = _cumulative_trapezoid(trace.column("l2_v_sq"), trace.taus)
    return float(E[k] + trace.params.b * int_v[k] - E[0])


@dataclass(frozen=True)
class CertificateInputs:
    b: float
    m: float
    alpha: float
    T0: float
    u0_norm_sq: float
    corr: float
    E0: float
    I_u0: float

    @classmethod
    def from_fields(cls, u0: Field, u1: Field, params: PhysParams, spec: NonlinearSpec,
                    T0: float) -> "CertificateInputs":
        return cls(b=params.b, m=params.m, alpha=spec.alpha, T0=T0,
                   u0_norm_sq=l2_norm_sq(u0), corr=inner(u0, u1).real,
                   E0=energy(u0, u1, params, spec), I_u0=nehari(u0, params, spec))


@dataclass
class CertificateReport:
    inputs: CertificateInputs
    mu: float
    omega: float
    sigma: float
    corr_threshold: float
    checks: Dict[str, bool]
    T_star_thm: Optional[float]
    T_star_M: Optional[float]
    valid: bool

    @property
    def M0(self) -> float:
        return (self.inputs.b * self.inputs.T0 + 1.0) * self.inputs.u0_norm_sq

    @property
    def dM0(self) -> float:
        return 2.0 * self.inputs.corr

    def to_dict(self) -> Dict[str, Any]:
        doc = asdict(self.inputs)
        doc.update(mu=self.mu, omega=self.omega, sigma=self.sigma, corr_threshold=self.corr_threshold)
        doc.update(self.checks)
        doc.update(T_star_thm=self.T_star_thm, T_star_M=self.T_star_M, valid=self.valid)
        return doc


def certificate(inputs: CertificateInputs) -> CertificateReport:
    b, m, alpha = inputs.b, inputs.m, inputs.alpha
    if not alpha > 2:
        raise HypothesisError(f"the growth condition needs alpha > 2, got alpha={alpha}")
    if not (b > 0 and m > 0):
        raise HypothesisError(f"the certificate needs b > 0 and m > 0, got b={b}, m={m}")

    mu = max(b, m, alpha)
    omega = alpha - 1.0 - m * (alpha - 2.0) / (mu + 1.0)
    sigma = (omega - 1.0) / 4.0
    corr_threshold = alpha * (mu + 1.0) / (m * (alpha - 2.0)) * inputs.E0
    checks = {
        "alpha_gt_2": True,
        "nehari_negative": inputs.I_u0 < 0,
        "correlation_ok": inputs.corr >= corr_threshold,
        "corr_positive": inputs.corr > 0,
    }

    T_star_thm = T_star_M = None
    if checks["corr_positive"]:
        T_star_thm = (2.0 * (mu + 1.0) * (b * inputs.T0 + 1.0)
                      / ((alpha - 2.0) * (mu + 1.0 - m)) * inputs.u0_norm_sq / inputs.corr)
        M0 = (b * inputs.T0 + 1.0) * inputs.u0_norm_sq
        T_star_M = M0 / (sigma * 2.0 * inputs.corr)

    report = CertificateReport(inputs=inputs, mu=mu, omega=omega, sigma=sigma,
                               corr_threshold=corr_threshold, checks=checks,
                               T_star_thm=T_star_thm, T_star_M=T_star_M,
                               valid=all(checks.values()))
    if not report.valid:
        failed = [name for name, ok in checks.items() if not ok]
        logger.info("certificate invalid: %s", ", ".join(failed))
    return report


def _uniform_windows(taus: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
    """Mask of interior indices whose five-point neighbourhood is evenly spaced."""
    mask = np.zeros(taus.size, dtype=bool)
    if taus.size < 5:
        return mask
    steps = np.diff(taus)
    for k in range(2, taus.size - 2):
        local = steps[k - 2:k + 2]
        mask[k] = np.all(np.abs(local - local[0]) <= rtol * local[0])
    return mask


def centered_derivative(values: np.ndarray, taus: np.ndarray) -> np.ndarray:
    """Fourth-order centred stencil on evenly spaced windows, numpy.gradient elsewhere."""
    out = np.gradient(values, taus, edge_order=2 if values.size >= 3 else 1)
    for k in np.flatnonzero(_uniform_windows(taus)):
        h = taus[k + 1] - taus[k]
        out[k] = (values[k - 2] - 8.0 * values[k - 1] + 8.0 * values[k + 1] - values[k + 2]) / (12.0 * h)
    return out


def centered_second_derivative(values: np.ndarray, taus: np.ndarray) -> np.ndarray:
    out = np.gradient(np.gradient(values, taus, edge_order=2), taus, edge_order=2)
    for k in range(1, values.size - 1):
        h1, h2 = taus[k] - taus[k - 1], taus[k + 1] - taus[k]
        out[k] = 2.0 * ((values[k + 1] - values[k]) / h2 - (values[k] - values[k - 1]) / h1) / (h1 + h2)
    for k in np.flatnonzero(_uniform_windows(taus)):
        h = taus[k + 1] - taus[k]
        out[k] = (-values[k - 2] + 16.0 * values[k - 1] - 30.0 * values[k]
                  + 16.0 * values[k + 1] - values[k + 2]) / (12.0 * h * h)
    return out


@dataclass
class MonitorSeries:
    tau: np.ndarray
    dA_fd: np.ndarray
    dA_identity: np.ndarray
    A_identity_relerr: np.ndarray
    nehari_negative: np.ndarray
    A_above_threshold: np.ndarray
    eta: np.ndarray
    M: np.ndarray
    Q: np.ndarray
    M_lower: np.ndarray
    M_above_lower: np.ndarray
    A_increasing: np.ndarray
    cs_slack: np.ndarray


def trace_monitors(trace: Trace, report: Optional[CertificateReport] = None) -> MonitorSeries:
    """Per-row checks of the identities and inequalities behind the concavity argument.

    Without a certificate report the omega-dependent monitors are NaN.
    """
    if len(trace) < 3:
        raise InputError(f"monitors need at least 3 trace rows, got {len(trace)}")
    taus = trace.taus
    b = trace.params.b
    A = trace.column("A")
    I = trace.column("I")
    v2 = trace.column("l2_v_sq")
    u2 = trace.column("l2_u_sq")
    int_u = trace.column("int_u_sq")
    int_v = trace.column("int_v_sq")

    dA_fd = centered_derivative(A, taus)
    dA_identity = 2.0 * v2 - 2.0 * I
    relerr = np.abs(dA_fd - dA_identity) / np.maximum(np.abs(dA_identity), np.finfo(float).tiny)

    nan = np.full(taus.size, np.nan)
    T0 = report.inputs.T0 if report is not None else trace.T0
    # M lives on [0, T0]
    if T0 is not None:
        M = np.where(taus <= T0, u2 + b * int_u + b * (T0 - taus) * u2[0], np.nan)
    else:
        M = nan.copy()
    dM = centered_derivative(M, taus)
    cs_slack = 4.0 * (u2 + b * int_u) * (v2 + b * int_v) - dM ** 2

    if report is None:
        threshold_ok = nan.copy()
        eta = Q = M_lower = nan.copy()
        above_lower = np.zeros(taus.size, dtype=bool)
    else:
        inp = report.inputs
        a_threshold = 2.0 * inp.alpha * (report.mu + 1.0) * inp.E0 / (inp.m * (inp.alpha - 2.0))
        threshold_ok = A > a_threshold
        omega = report.omega
        eta = -(omega + 1.0) * v2 - (omega + 3.0) * b * int_v - 2.0 * I
        Q = centered_second_derivative(M, taus) * M - 0.25 * (omega + 3.0) * dM ** 2
        sigma = report.sigma
        bracket = report.M0 ** (-sigma) - sigma * report.dM0 * report.M0 ** (-sigma - 1.0) * taus
        with np.errstate(divide="ignore", invalid="ignore"):
            M_lower = np.where(bracket > 0, np.abs(bracket) ** (-1.0 / sigma), np.inf)
        above_lower = np.where(np.isfinite(M), M >= M_lower * (1.0 - 1e-6), True)

    return MonitorSeries(
        tau=taus, dA_fd=dA_fd, dA_identity=dA_identity, A_identity_relerr=relerr,
        nehari_negative=I < 0, A_above_threshold=threshold_ok, eta=eta, M=M, Q=Q,
        M_lower=M_lower, M_above_lower=above_lower,
        A_increasing=np.where(I < 0, dA_identity > 0, True), cs_slack=cs_slack)


def summarize_monitors(monitors: MonitorSeries, tau_detect: Optional[float] = None) -> Dict[str, Any]:
    """Summary over rows up to tau_detect; the A-identity error uses the middle third."""
    window = np.ones(monitors.tau.size, dtype=bool) if tau_detect is None else monitors.tau <= tau_detect
    count = int(np.count_nonzero(window))

    def _min(series):
        values = series[window]
        values = values[np.isfinite(values)]
        return float(np.min(values)) if values.size else None

    middle = np.arange(count // 3, max(count - count // 3, count // 3 + 1))
    middle = middle[(middle >= 2) & (middle <= count - 3)]
    relerr = monitors.A_identity_relerr[middle]
    return {
        "A_identity_maxrelerr": float(np.max(relerr)) if relerr.size else None,
        "I_negative_throughout": bool(np.all(monitors.nehari_negative[window])),
        "eta_min": _min(monitors.eta),
        "Q_min": _min(monitors.Q),
        "A_increasing_throughout": bool(np.all(monitors.A_increasing[window])),
        "M_above_lower_throughout": bool(np.all(monitors.M_above_lower[window])),
        "cs_slack_min": _min(monitors.cs_slack),
        "rows": count,
    }


@dataclass
class PreparedData:
    u0: Field
    u1: Field
    report: CertificateReport
    amplitude: float


def prepare_blowup_data(grid: BoxGrid, params: PhysParams, spec: NonlinearSpec, T0: float,
                        width: float = 1.0, center_s: float = 0.0, velocity_ratio: float = 1.0,
                        lam_start: float = 1e-3, lam_growth: float = 1.05,
                        lam_cap: float = 1e6) -> PreparedData:
    """Scan u0 = lam * bump, u1 = c * u0 upward in lam until the certificate holds."""
    if spec.kind != "power":
        raise InputError("blow-up data preparation needs the power nonlinearity")
    if not velocity_ratio > 0:
        raise InputError(f"velocity ratio must be positive, got {velocity_ratio}")
    if not width > 0:
        raise InputError(f"bump width must be positive, got {width}")
    params.require_theorem_mode()

    center = np.zeros(grid.ndim)
    center[grid.s_axis] = center_s
    bump = Field.sample(grid, GaussianBump(center, np.full(grid.ndim, width)))
    base_sq = l2_norm_sq(bump)
    base_grad = gradh_norm_sq(bump)
    base_power = integrate(grid, np.abs(bump.values) ** (spec.p + 1.0))
    c, p, kappa = velocity_ratio, spec.p, spec.kappa
    alpha, m = spec.alpha, params.m
    mu = max(params.b, m, alpha)
    factor = alpha * (mu + 1.0) / (m * (alpha - 2.0))

    lam = lam_start
    while lam <= lam_cap:
        quad = lam * lam
        nl = kappa * lam ** (p + 1.0) * base_power
        I_lam = quad * (m * base_sq + base_grad) - nl
        E_lam = quad * 0.5 * ((c * c + m) * base_sq + base_grad) - nl / (p + 1.0)
        corr = c * quad * base_sq
        if I_lam < 0 and corr >= factor * E_lam:
            u0 = bump.with_values(lam * bump.values)
            u1 = bump.with_values(c * u0.values)
            report = certificate(CertificateInputs.from_fields(u0, u1, params, spec, T0))
            if report.valid:
                logger.info("certified blow-up data at amplitude %.6g (E0=%.6g, I=%.6g)",
                            lam, report.inputs.E0, report.inputs.I_u0)
                return PreparedData(u0, u1, report, lam)
        lam *= lam_growth

    raise PreparationError(
        f"no certified amplitude up to {lam_cap:g} (kappa={kappa}, |bump|^2={base_sq:.6g}, "
        f"|grad_H bump|^2={base_grad:.6g}, int|bump|^(p+1)={base_power:.6g})")
