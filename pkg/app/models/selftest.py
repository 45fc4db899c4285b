"""
Fast invariant suite behind `python -m app.main selftest`.

Each check returns {"name", "success", "error"}; a check never raises.
Some checks accept a substitute ingredient so a deliberately broken
version can be shown to fail.
"""
import dataclasses
import logging
import math
from typing import Callable, Dict, List, Optional

import numpy as np

from app.models.functionals import CertificateInputs, certificate
from app.models.grid import BOUNDARY_CONDITIONS, BoxGrid, Field, l2_norm_sq
from app.models.hgroup import (GroupPoint, VectorField, catalog, commutator_defect, dilate, inverse,
                               mul, x_field)
from app.models.nonlinearity import F_eval, NonlinearSpec, check_condition, f_eval
from app.models.oracle import scalar_solve
from app.models.subop import sbp_defect, spectral_bound
from config.settings import Config

logger = logging.getLogger(__name__)

CheckResult = Dict[str, object]


def _result(name: str, error: Optional[str] = None) -> CheckResult:
    return {"name": name, "success": error is None, "error": error}


def _rng(offset: int = 0) -> np.random.Generator:
    return np.random.default_rng(Config.RANDOM_SEED + offset)


def _random_point(rng: np.random.Generator, n: int, scale: float = 2.0) -> GroupPoint:
    return GroupPoint.from_vector(rng.uniform(-scale, scale, 2 * n + 1))


def check_group_axioms(samples: int = 50, n: int = 2) -> CheckResult:
    name = "group_axioms"
    rng = _rng(1)
    for _ in range(samples):
        a, b, c = (_random_point(rng, n) for _ in range(3))
        lam = float(rng.uniform(0.1, 3.0))
        pairs = {
            "associativity": (mul(mul(a, b), c), mul(a, mul(b, c))),
            "inverse": (mul(a, inverse(a)), GroupPoint.zero(n)),
            "identity": (mul(GroupPoint.zero(n), a), a),
            "dilation": (dilate(lam, mul(a, b)), mul(dilate(lam, a), dilate(lam, b))),
        }
        for label, (lhs, rhs) in pairs.items():
            gap = float(np.max(np.abs(lhs.as_vector() - rhs.as_vector())))
            if gap > 1e-12 * (1.0 + float(np.max(np.abs(lhs.as_vector())))):
                return _result(name, f"{label} fails by {gap:.3e} at {a.as_vector()}")
    return _result(name)


def check_commutator(y_coupling: float = -2.0, points: int = 50) -> CheckResult:
    """X_i Y_i - Y_i X_i = -4 d/ds over the test-function catalog."""
    name = "commutator"
    rng = _rng(2)
    n = 1
    y_vf = VectorField(axis=n, coupled_axis=0, coupling=y_coupling)
    for f in catalog(n):
        for _ in range(points):
            xi = _random_point(rng, n, scale=1.0)
            z = xi.as_vector()
            jet = f.jet(z)
            scale = (1.0 + float(np.max(np.abs(z)))) ** 2 * (
                1.0 + float(np.max(np.abs(jet.grad))) + float(np.max(np.abs(jet.hess))))
            defect = abs(commutator_defect(0, f, xi, x_vf=x_field(0, n), y_vf=y_vf))
            if defect > 1e-13 * scale:
                return _result(name, f"defect {defect:.3e} for {f.name} at {z}")
    return _result(name)


def check_sbp(fields: int = 20, N: int = 9) -> CheckResult:
    """<L_h u, u> = -|grad_H u|^2 for random complex fields on every boundary mode."""
    name = "summation_by_parts"
    rng = _rng(3)
    for bc in BOUNDARY_CONDITIONS:
        grid = BoxGrid(n=1, N_x=N, N_y=N, N_s=N, bc=bc)
        bound = spectral_bound(grid)
        for _ in range(fields):
            u = Field(grid, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))
            defect = sbp_defect(u)
            if defect > 1e-12 * (1.0 + l2_norm_sq(u) * bound):
                return _result(name, f"defect {defect:.3e} with bc={bc}")
    return _result(name)


def check_nonlinearity(exponents=(2.0, 3.0, 5.0), samples: int = 200) -> CheckResult:
    """Re[f(z) conj z] = (p+1) F(z), and dF along zeta equals Re[f(z) conj zeta] to O(eps^2)."""
    name = "nonlinearity_identities"
    rng = _rng(4)
    for p in exponents:
        spec = NonlinearSpec.power(p)
        z = rng.standard_normal(samples) + 1j * rng.standard_normal(samples)
        gap = np.abs(np.real(f_eval(spec, z) * np.conj(z)) - (p + 1.0) * F_eval(spec, z))
        if np.any(gap > 1e-12 * (1.0 + (p + 1.0) * F_eval(spec, z))):
            return _result(name, f"growth identity fails for p={p} (max gap {gap.max():.3e})")
        zeta = rng.standard_normal(samples) + 1j * rng.standard_normal(samples)
        exact = np.real(f_eval(spec, z) * np.conj(zeta))
        errors = []
        for eps in (1e-3, 1e-4):
            fd = (F_eval(spec, z + eps * zeta) - F_eval(spec, z - eps * zeta)) / (2.0 * eps)
            errors.append(float(np.max(np.abs(fd - exact))))
        order = math.log10(errors[0] / errors[1]) if errors[1] > 0 else math.inf
        if order < 1.8:
            return _result(name, f"directional derivative order {order:.2f} for p={p}")
        try:
            check_condition(spec)
        except ValueError as exc:
            return _result(name, str(exc))
    return _result(name)


def check_bound_equivalence(samples: int = 1000, alpha_error: float = 0.0) -> CheckResult:
    """T*_thm and T*_M agree; alpha_error perturbs the alpha fed to T*_thm."""
    name = "bound_equivalence"
    rng = _rng(5)
    for _ in range(samples):
        inputs = CertificateInputs(
            b=float(rng.uniform(0.05, 5.0)), m=float(rng.uniform(0.05, 5.0)),
            alpha=float(rng.uniform(2.05, 8.0)), T0=float(rng.uniform(0.1, 5.0)),
            u0_norm_sq=float(rng.uniform(0.1, 10.0)), corr=float(rng.uniform(0.1, 10.0)),
            E0=float(rng.uniform(-1.0, 1.0)), I_u0=-1.0)
        t_star_m = certificate(inputs).T_star_M
        t_star_thm = certificate(dataclasses.replace(inputs, alpha=inputs.alpha + alpha_error)).T_star_thm
        if abs(t_star_thm - t_star_m) > 1e-12 * abs(t_star_m):
            return _result(name, f"T*_thm={t_star_thm!r} != T*_M={t_star_m!r} for {inputs}")
    return _result(name)


def check_certificate_example() -> CheckResult:
    name = "certificate_example"
    report = certificate(CertificateInputs(b=1.0, m=1.0, alpha=3.0, T0=2.0, u0_norm_sq=1.0,
                                           corr=4.0, E0=0.25, I_u0=-1.0))
    expected = {"mu": 3.0, "omega": 1.75, "sigma": 0.1875, "T_star_thm": 2.0, "T_star_M": 2.0}
    got = report.to_dict()
    for key, value in expected.items():
        if abs(got[key] - value) > 1e-14:
            return _result(name, f"{key}={got[key]!r}, expected {value!r}")
    if not report.valid:
        return _result(name, "worked example should be a valid certificate")
    return _result(name)


def check_scalar_oracle() -> CheckResult:
    name = "scalar_oracle"
    blowup = scalar_solve(6.0, 12.0, b=0.0, m=0.0, kappa=1.0, p=2.0, t_end=2.0)
    if blowup.blowup_estimate is None or abs(blowup.blowup_estimate - 1.0) > 1e-4:
        return _result(name, f"blow-up time {blowup.blowup_estimate} for u = 6/(1-t)^2")

    taus = np.linspace(0.0, 10.0, 101)
    damped = scalar_solve(1.0, 0.0, b=0.2, m=1.0, kappa=0.0, p=2.0, t_end=10.0)
    wd = math.sqrt(0.99)
    exact = np.exp(-0.1 * taus) * (np.cos(wd * taus) + 0.1 / wd * np.sin(wd * taus))
    gap = float(np.max(np.abs(damped.at(taus) - exact)))
    if gap > 1e-8:
        return _result(name, f"damped oscillator off by {gap:.3e}")

    zero = scalar_solve(0.0, 0.0, b=1.0, m=1.0, kappa=1.0, p=3.0, t_end=1.0)
    if np.any(zero.u != 0.0):
        return _result(name, "zero data did not stay zero")
    return _result(name)


DEFAULT_CHECKS: List[Callable[[], CheckResult]] = [
    check_group_axioms,
    check_commutator,
    check_sbp,
    check_nonlinearity,
    check_bound_equivalence,
    check_certificate_example,
    check_scalar_oracle,
]


def run_selftest(checks: Optional[List[Callable[[], CheckResult]]] = None) -> List[CheckResult]:
    results = []
    for check in checks or DEFAULT_CHECKS:
        try:
            result = check()
        except Exception as exc:
            result = _result(check.__name__.replace("check_", ""), f"{type(exc).__name__}: {exc}")
        level = logging.INFO if result["success"] else logging.ERROR
        logger.log(level, "selftest %s: %s", result["name"], "pass" if result["success"] else result["error"])
        results.append(result)
    return results


def format_table(results: List[CheckResult]) -> str:
    width = max(len(str(r["name"])) for r in results) if results else 10
    lines = [f"{'check':<{width}}  result"]
    for r in results:
        lines.append(f"{r['name']:<{width}}  {'PASS' if r['success'] else 'FAIL: ' + str(r['error'])}")
    passed = sum(1 for r in results if r["success"])
    lines.append(f"{passed}/{len(results)} checks passed")
    return "\n".join(lines)
