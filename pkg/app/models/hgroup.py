"""
Heisenberg group algebra and exact left-invariant vector fields.

Coordinates of a point are stacked as z = (x_1..x_n, y_1..y_n, s): the
central coordinate is called s so that t stays free for simulation time.
All indices are 0-based. Test functions return closed-form 2-jets and act
as the ground-truth oracle for the discrete operators in `subop`.
"""
import itertools
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from app.models.errors import InputError


@dataclass(frozen=True)
class GroupPoint:
    x: np.ndarray
    y: np.ndarray
    s: float

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if x.ndim != 1 or x.shape != y.shape:
            raise InputError(f"x and y must be vectors of equal length, got {x.shape} and {y.shape}")
        s = float(self.s)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y)) and math.isfinite(s)):
            raise InputError("GroupPoint components must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "s", s)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @classmethod
    def zero(cls, n: int) -> "GroupPoint":
        return cls(np.zeros(n), np.zeros(n), 0.0)

    @classmethod
    def from_vector(cls, z: Sequence[float]) -> "GroupPoint":
        z = np.asarray(z, dtype=float)
        if z.ndim != 1 or z.shape[0] % 2 != 1:
            raise InputError(f"coordinate vector must have odd length 2n+1, got {z.shape}")
        n = (z.shape[0] - 1) // 2
        return cls(z[:n], z[n:2 * n], z[2 * n])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.y, [self.s]])


def mul(xi: GroupPoint, eta: GroupPoint) -> GroupPoint:
    """Group law (x + x', y + y', s + s' + 2 sum(x'_i y_i - x_i y'_i))."""
    if xi.n != eta.n:
        raise InputError(f"dimension mismatch: n={xi.n} and n={eta.n}")
    twist = 2.0 * float(np.dot(eta.x, xi.y) - np.dot(xi.x, eta.y))
    return GroupPoint(xi.x + eta.x, xi.y + eta.y, xi.s + eta.s + twist)


def inverse(xi: GroupPoint) -> GroupPoint:
    return GroupPoint(-xi.x, -xi.y, -xi.s)


def dilate(lam: float, xi: GroupPoint) -> GroupPoint:
    if not lam > 0:
        raise InputError(f"dilation factor must be positive, got {lam}")
    return GroupPoint(lam * xi.x, lam * xi.y, lam * lam * xi.s)


@dataclass
class Jet2:
    """Value, gradient and Hessian of a scalar function, possibly batched.

    grad has shape (d, *batch) and hess (d, d, *batch) with d = 2n+1.
    """
    value: np.ndarray
    grad: np.ndarray
    hess: np.ndarray

    def __post_init__(self):
        d = self.grad.shape[0]
        if self.hess.shape[:2] != (d, d):
            raise InputError(f"Hessian shape {self.hess.shape} does not match gradient length {d}")
        # Only the upper triangle is authoritative.
        hess = np.array(self.hess, dtype=complex)
        for k in range(d):
            for l in range(k + 1, d):
                hess[l, k] = hess[k, l]
        self.hess = hess

    @property
    def dim(self) -> int:
        return self.grad.shape[0]


class TestFunction:
    """Closed-form scalar function on H^n that evaluates its exact 2-jet."""
    __test__ = False

    name = "test_function"

    def __init__(self, dim: int):
        if dim < 3 or dim % 2 != 1:
            raise InputError(f"coordinate dimension must be 2n+1 >= 3, got {dim}")
        self.dim = dim

    def jet(self, z) -> Jet2:
        raise NotImplementedError

    def __call__(self, z) -> np.ndarray:
        return self.jet(z).value

    def _coords(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.shape[0] != self.dim:
            raise InputError(f"{self.name}: expected {self.dim} coordinates, got {z.shape[0]}")
        return z

    def __repr__(self):
        return f"<{self.name}>"


class _ProductFunction(TestFunction):
    """f(z) = amplitude * prod_k phi_k(z_k); subclasses supply the factor derivatives."""

    def __init__(self, dim: int, amplitude: complex = 1.0):
        super().__init__(dim)
        self.amplitude = complex(amplitude)

    def _factor(self, axis: int, zk: np.ndarray, order: int) -> np.ndarray:
        raise NotImplementedError

    def jet(self, z) -> Jet2:
        z = self._coords(z)
        d = self.dim
        batch = z.shape[1:]
        f0 = [np.broadcast_to(self._factor(k, z[k], 0), batch) for k in range(d)]
        f1 = [np.broadcast_to(self._factor(k, z[k], 1), batch) for k in range(d)]
        f2 = [np.broadcast_to(self._factor(k, z[k], 2), batch) for k in range(d)]

        def rest(*skip):
            out = np.full(batch, self.amplitude, dtype=complex)
            for j in range(d):
                if j not in skip:
                    out = out * f0[j]
            return out

        value = rest()
        grad = np.stack([f1[k] * rest(k) for k in range(d)])
        hess = np.zeros((d, d) + batch, dtype=complex)
        for k in range(d):
            hess[k, k] = f2[k] * rest(k)
            for l in range(k + 1, d):
                hess[k, l] = f1[k] * f1[l] * rest(k, l)
        return Jet2(value, grad, hess)


class Monomial(_ProductFunction):
    """prod_k z_k ** a_k with total degree <= 4."""

    def __init__(self, exponents: Sequence[int], amplitude: complex = 1.0):
        exponents = tuple(int(a) for a in exponents)
        super().__init__(len(exponents), amplitude)
        if any(a < 0 for a in exponents) or sum(exponents) > 4:
            raise InputError(f"monomial exponents must be nonnegative with total degree <= 4: {exponents}")
        self.exponents = exponents
        self.name = "monomial" + "".join(str(a) for a in exponents)

    def _factor(self, axis, zk, order):
        a = self.exponents[axis]
        if a < order:
            return np.zeros_like(zk)
        return math.perm(a, order) * zk ** (a - order)


class SineProduct(_ProductFunction):
    """prod_k sin(k_k z_k + phase_k); k = 0 with phase pi/2 makes an axis constant."""

    def __init__(self, wavenumbers: Sequence[float], phases: Optional[Sequence[float]] = None,
                 amplitude: complex = 1.0):
        wavenumbers = np.asarray(wavenumbers, dtype=float)
        super().__init__(wavenumbers.shape[0], amplitude)
        self.wavenumbers = wavenumbers
        self.phases = np.zeros_like(wavenumbers) if phases is None else np.asarray(phases, dtype=float)
        self.name = "sine_product"

    def _factor(self, axis, zk, order):
        k, phi = self.wavenumbers[axis], self.phases[axis]
        arg = k * zk + phi
        if order == 0:
            return np.sin(arg)
        if order == 1:
            return k * np.cos(arg)
        return -k * k * np.sin(arg)


class GaussianBump(TestFunction):
    """amplitude * exp(-sum_k ((z_k - c_k) / w_k)^2)."""

    def __init__(self, center: Sequence[float], widths: Sequence[float], amplitude: complex = 1.0):
        center = np.asarray(center, dtype=float)
        super().__init__(center.shape[0])
        self.center = center
        self.widths = np.broadcast_to(np.asarray(widths, dtype=float), center.shape).copy()
        if np.any(self.widths <= 0):
            raise InputError("Gaussian widths must be positive")
        self.amplitude = complex(amplitude)
        self.name = "gaussian_bump"

    def jet(self, z) -> Jet2:
        z = self._coords(z)
        d = self.dim
        shape = (d,) + (1,) * (z.ndim - 1)
        offset = (z - self.center.reshape(shape)) / self.widths.reshape(shape)
        value = self.amplitude * np.exp(-np.sum(offset ** 2, axis=0))
        g = -2.0 * offset / self.widths.reshape(shape)
        grad = value * g
        hess = np.zeros((d, d) + z.shape[1:], dtype=complex)
        for k in range(d):
            hess[k, k] = value * (g[k] * g[k] - 2.0 / self.widths[k] ** 2)
            for l in range(k + 1, d):
                hess[k, l] = value * g[k] * g[l]
        return Jet2(value, grad.astype(complex), hess)


def catalog(n: int = 1) -> List[TestFunction]:
    """Built-in oracle functions: low-degree monomials, two bumps, two sine products."""
    d = 2 * n + 1
    functions: List[TestFunction] = []
    for i, j in itertools.product(range(n), range(n)):
        for a, b, c in itertools.product(range(5), repeat=3):
            if a + b + c > 4 or (i > 0 and a == 0) or (j > 0 and b == 0):
                continue
            exponents = [0] * d
            exponents[i] += a
            exponents[n + j] += b
            exponents[2 * n] += c
            functions.append(Monomial(exponents))
    functions.append(GaussianBump(np.zeros(d), np.full(d, 1.5)))
    functions.append(GaussianBump(np.linspace(-0.5, 0.5, d), np.linspace(0.8, 2.0, d), amplitude=1.0 - 2.0j))
    functions.append(SineProduct(np.linspace(0.5, 1.5, d)))
    functions.append(SineProduct(np.full(d, 0.7), phases=np.linspace(0.1, 0.9, d), amplitude=0.5j))
    return functions


def finite_difference_jet(f: TestFunction, z, h: float = 1e-4) -> Jet2:
    """Central differences of the value (gradient) and of the exact gradient (Hessian)."""
    z = np.asarray(z, dtype=float)
    d = z.shape[0]
    grad = np.zeros(d, dtype=complex)
    hess = np.zeros((d, d), dtype=complex)
    for k in range(d):
        e = np.zeros(d)
        e[k] = h
        grad[k] = (f.jet(z + e).value - f.jet(z - e).value) / (2 * h)
        hess[k] = (f.jet(z + e).grad - f.jet(z - e).grad) / (2 * h)
    return Jet2(f.jet(z).value, grad, hess)


@dataclass(frozen=True)
class VectorField:
    """d/dz_axis + coupling * z_coupled * d/ds, a left-invariant horizontal field."""
    axis: int
    coupled_axis: int
    coupling: float

    def apply(self, jet: Jet2, z) -> np.ndarray:
        s = jet.dim - 1
        return jet.grad[self.axis] + self.coupling * z[self.coupled_axis] * jet.grad[s]

    def apply_composed(self, inner: "VectorField", jet: Jet2, z) -> np.ndarray:
        """self(inner f) from the 2-jet of f."""
        s = jet.dim - 1
        h = jet.hess
        d_axis = h[inner.axis, self.axis] + inner.coupling * z[inner.coupled_axis] * h[s, self.axis]
        if self.axis == inner.coupled_axis:
            d_axis = d_axis + inner.coupling * jet.grad[s]
        d_s = h[inner.axis, s] + inner.coupling * z[inner.coupled_axis] * h[s, s]
        return d_axis + self.coupling * z[self.coupled_axis] * d_s


def x_field(i: int, n: int) -> VectorField:
    _check_index(i, n)
    return VectorField(axis=i, coupled_axis=n + i, coupling=2.0)


def y_field(i: int, n: int) -> VectorField:
    _check_index(i, n)
    return VectorField(axis=n + i, coupled_axis=i, coupling=-2.0)


def _check_index(i: int, n: int):
    if not 0 <= i < n:
        raise InputError(f"horizontal index {i} out of range for n={n}")


def _point_jet(f: TestFunction, xi: GroupPoint):
    if f.dim != 2 * xi.n + 1:
        raise InputError(f"{f.name} expects dimension {f.dim}, point has n={xi.n}")
    z = xi.as_vector()
    return z, f.jet(z)


def apply_X(i: int, f: TestFunction, xi: GroupPoint) -> complex:
    z, jet = _point_jet(f, xi)
    return complex(x_field(i, xi.n).apply(jet, z))


def apply_Y(i: int, f: TestFunction, xi: GroupPoint) -> complex:
    z, jet = _point_jet(f, xi)
    return complex(y_field(i, xi.n).apply(jet, z))


def commutator_defect(i: int, f: TestFunction, xi: GroupPoint,
                      x_vf: Optional[VectorField] = None,
                      y_vf: Optional[VectorField] = None) -> complex:
    """X_i(Y_i f) - Y_i(X_i f) + 4 df/ds; zero up to rounding for the true fields."""
    z, jet = _point_jet(f, xi)
    x_vf = x_vf or x_field(i, xi.n)
    y_vf = y_vf or y_field(i, xi.n)
    defect = x_vf.apply_composed(y_vf, jet, z) - y_vf.apply_composed(x_vf, jet, z) + 4.0 * jet.grad[-1]
    return complex(defect)


def sublaplacian_from_jet(jet: Jet2, z) -> np.ndarray:
    """sum_i [f_xx + f_yy + 4y f_xs - 4x f_ys + 4(x^2 + y^2) f_ss], batched."""
    n = (jet.dim - 1) // 2
    s = 2 * n
    h = jet.hess
    out = np.zeros_like(jet.value, dtype=complex)
    for i in range(n):
        x, y = z[i], z[n + i]
        out = out + (h[i, i] + h[n + i, n + i] + 4.0 * y * h[i, s] - 4.0 * x * h[n + i, s]
                     + 4.0 * (x * x + y * y) * h[s, s])
    return out


def apply_subLaplacian_exact(f: TestFunction, xi: GroupPoint) -> complex:
    z, jet = _point_jet(f, xi)
    return complex(sublaplacian_from_jet(jet, z))


def apply_subLaplacian_composed(f: TestFunction, xi: GroupPoint) -> complex:
    """sum_i X_i(X_i f) + Y_i(Y_i f) evaluated through field composition."""
    z, jet = _point_jet(f, xi)
    total = 0.0j
    for i in range(xi.n):
        xf, yf = x_field(i, xi.n), y_field(i, xi.n)
        total += complex(xf.apply_composed(xf, jet, z) + yf.apply_composed(yf, jet, z))
    return total
