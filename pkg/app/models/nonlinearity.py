"""
Physical parameters and the nonlinearity f(z) = g'(|z|) z / |z|, F(z) = g(|z|).

The power kind is f(z) = kappa |z|^(p-1) z with F(z) = kappa |z|^(p+1) / (p+1),
for which Re[f(z) conj(z)] = (p+1) F(z), i.e. the growth condition holds with
equality at alpha = p+1. Custom kinds must pass a sampled check of
alpha F(z) <= Re[f(z) conj(z)] before use.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from app.models.errors import HypothesisError, InputError, NumericalAbort

logger = logging.getLogger(__name__)

NONLINEAR_KINDS = ("power", "custom")


@dataclass(frozen=True)
class PhysParams:
    b: float = 0.0
    m: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.b) and math.isfinite(self.m)):
            raise InputError(f"damping and mass must be finite, got b={self.b}, m={self.m}")
        if self.b < 0 or self.m < 0:
            raise InputError(f"damping and mass must be nonnegative, got b={self.b}, m={self.m}")

    @property
    def theorem_mode(self) -> bool:
        return self.b > 0 and self.m > 0

    def require_theorem_mode(self):
        if not self.theorem_mode:
            raise HypothesisError(f"the blow-up theorem needs b > 0 and m > 0, got b={self.b}, m={self.m}")


@dataclass(frozen=True)
class NonlinearSpec:
    kind: str = "power"
    p: float = 3.0
    kappa: float = 1.0
    f: Optional[Callable] = None
    F: Optional[Callable] = None
    declared_alpha: Optional[float] = None

    def __post_init__(self):
        if self.kind not in NONLINEAR_KINDS:
            raise InputError(f"nonlinearity kind must be one of {NONLINEAR_KINDS}, got {self.kind!r}")
        if self.kind == "power":
            if not self.p > 1:
                raise InputError(f"power exponent must exceed 1, got p={self.p}")
            if not self.kappa >= 0:
                raise InputError(f"coupling must be nonnegative, got kappa={self.kappa}")
        elif self.f is None or self.F is None or self.declared_alpha is None:
            raise InputError("custom nonlinearity needs f, F and a declared alpha")

    @classmethod
    def power(cls, p: float, kappa: float = 1.0) -> "NonlinearSpec":
        return cls(kind="power", p=p, kappa=kappa)

    @classmethod
    def custom(cls, f: Callable, F: Callable, alpha: float, samples=None) -> "NonlinearSpec":
        spec = cls(kind="custom", f=f, F=F, declared_alpha=alpha)
        check_condition(spec, samples)
        return spec

    @property
    def alpha(self) -> float:
        return self.p + 1.0 if self.kind == "power" else float(self.declared_alpha)

    @property
    def profile_exponent(self) -> float:
        """Exponent of the scalar blow-up profile u ~ C (T - tau)^(-2/(q-1)); q = alpha - 1."""
        return self.alpha - 1.0

    @property
    def is_linear(self) -> bool:
        return self.kind == "power" and self.kappa == 0


def _custom_output(spec: NonlinearSpec, func: Callable, z, label: str) -> np.ndarray:
    out = np.asarray(func(z))
    if not np.all(np.isfinite(out)):
        bad = int(np.count_nonzero(~np.isfinite(out)))
        raise NumericalAbort(f"custom {label} returned {bad} non-finite values "
                             f"(max |z| = {float(np.max(np.abs(z))):.6g})")
    return out


def f_eval(spec: NonlinearSpec, z):
    if spec.kind == "power":
        z = np.asarray(z, dtype=complex)
        return spec.kappa * np.abs(z) ** (spec.p - 1.0) * z
    return _custom_output(spec, spec.f, z, "f").astype(complex)


def F_eval(spec: NonlinearSpec, z):
    if spec.kind == "power":
        return spec.kappa * np.abs(z) ** (spec.p + 1.0) / (spec.p + 1.0)
    return _custom_output(spec, spec.F, z, "F").real


def condition_gap(spec: NonlinearSpec, z, alpha: Optional[float] = None) -> np.ndarray:
    """Re[f(z) conj(z)] - alpha F(z); nonnegative wherever the growth condition holds."""
    alpha = spec.alpha if alpha is None else alpha
    z = np.asarray(z, dtype=complex)
    return np.real(f_eval(spec, z) * np.conj(z)) - alpha * F_eval(spec, z)


def default_condition_samples() -> np.ndarray:
    radii = np.logspace(-3, 3, 25)
    phases = np.exp(1j * np.linspace(0.0, 2.0 * np.pi, 8, endpoint=False))
    return np.outer(radii, phases).ravel()


def check_condition(spec: NonlinearSpec, samples=None, rtol: float = 1e-12):
    if not spec.alpha > 2:
        raise HypothesisError(f"growth condition needs alpha > 2, got alpha={spec.alpha}")
    z = default_condition_samples() if samples is None else np.asarray(samples, dtype=complex)
    gap = condition_gap(spec, z)
    scale = 1.0 + np.abs(np.real(f_eval(spec, z) * np.conj(z)))
    worst = int(np.argmin(gap / scale))
    if gap[worst] < -rtol * scale[worst]:
        raise HypothesisError(f"alpha F(z) <= Re[f(z) conj z] fails at z={z[worst]:.6g} "
                              f"(gap {gap[worst]:.3e})")
    logger.debug("growth condition holds on %d samples", z.size)


def growth_rate(spec: NonlinearSpec, linf: float) -> float:
    """Linearized growth rate sqrt((alpha-1) |f(L)| / L) at amplitude L."""
    if linf <= 0 or spec.is_linear:
        return 0.0
    return math.sqrt(spec.profile_exponent * abs(complex(f_eval(spec, linf))) / linf)
