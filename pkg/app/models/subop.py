"""
Discrete horizontal gradient and sub-Laplacian with exact summation by parts.

X_i^+ u = D^+_{x_i} u + 2 y_i D^+_s u and Y_i^+ u = D^+_{y_i} u - 2 x_i D^+_s u,
with D^+ the forward difference. The backward fields X_i^-, Y_i^- use D^-.
Dirichlet ghosts are zero, periodic axes wrap. Since y_i is constant along
x_i and s (and x_i along y_i and s), the adjoint of X_i^+ is exactly -X_i^-,
so L_h = sum_i X_i^- X_i^+ + Y_i^- Y_i^+ satisfies
<L_h u, u> = -sum_i (|X_i^+ u|^2 + |Y_i^+ u|^2) to rounding.
"""
import functools
import logging
import math
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from app.models.errors import InputError
from app.models.grid import BoxGrid, Field, inner, l2_norm_sq
from config.settings import Config

logger = logging.getLogger(__name__)


def forward_difference(values: np.ndarray, grid: BoxGrid, axis: int) -> np.ndarray:
    h = grid.spacing(axis)
    if grid.is_periodic(axis):
        return (np.roll(values, -1, axis=axis) - values) / h
    return np.diff(values, axis=axis, append=0.0) / h


def backward_difference(values: np.ndarray, grid: BoxGrid, axis: int) -> np.ndarray:
    h = grid.spacing(axis)
    if grid.is_periodic(axis):
        return (values - np.roll(values, 1, axis=axis)) / h
    return np.diff(values, axis=axis, prepend=0.0) / h


def _check_index(i: int, grid: BoxGrid):
    if not 0 <= i < grid.n:
        raise InputError(f"horizontal index {i} out of range for n={grid.n}")


def _x_field(values, ds, grid, i, difference):
    return difference(values, grid, i) + 2.0 * grid.coordinate_array(grid.n + i) * ds


def _y_field(values, ds, grid, i, difference):
    return difference(values, grid, grid.n + i) - 2.0 * grid.coordinate_array(i) * ds


def x_forward(i: int, u: Field) -> Field:
    _check_index(i, u.grid)
    ds = forward_difference(u.values, u.grid, u.grid.s_axis)
    return u.with_values(_x_field(u.values, ds, u.grid, i, forward_difference))


def y_forward(i: int, u: Field) -> Field:
    _check_index(i, u.grid)
    ds = forward_difference(u.values, u.grid, u.grid.s_axis)
    return u.with_values(_y_field(u.values, ds, u.grid, i, forward_difference))


def x_backward(i: int, u: Field) -> Field:
    _check_index(i, u.grid)
    ds = backward_difference(u.values, u.grid, u.grid.s_axis)
    return u.with_values(_x_field(u.values, ds, u.grid, i, backward_difference))


def y_backward(i: int, u: Field) -> Field:
    _check_index(i, u.grid)
    ds = backward_difference(u.values, u.grid, u.grid.s_axis)
    return u.with_values(_y_field(u.values, ds, u.grid, i, backward_difference))


def horizontal_components(values: np.ndarray, grid: BoxGrid) -> Tuple[np.ndarray, ...]:
    """(X_1^+ u, ..., X_n^+ u, Y_1^+ u, ..., Y_n^+ u) as raw arrays."""
    ds = forward_difference(values, grid, grid.s_axis)
    xs = [_x_field(values, ds, grid, i, forward_difference) for i in range(grid.n)]
    ys = [_y_field(values, ds, grid, i, forward_difference) for i in range(grid.n)]
    return tuple(xs + ys)


@dataclass
class HorizontalGradient:
    components: Tuple[Field, ...]

    def norm_sq(self) -> float:
        return sum(l2_norm_sq(c) for c in self.components)


def grad_h(u: Field) -> HorizontalGradient:
    return HorizontalGradient(tuple(u.with_values(c) for c in horizontal_components(u.values, u.grid)))


def sublaplacian_values(values: np.ndarray, grid: BoxGrid) -> np.ndarray:
    """sum_i X_i^-(X_i^+ u) + Y_i^-(Y_i^+ u) on raw arrays."""
    n = grid.n
    out = np.zeros_like(values, dtype=complex)
    components = horizontal_components(values, grid)
    for i in range(n):
        for w, field in ((components[i], _x_field), (components[n + i], _y_field)):
            ds = backward_difference(w, grid, grid.s_axis)
            out += field(w, ds, grid, i, backward_difference)
    return out


def sublaplacian(u: Field) -> Field:
    return u.with_values(sublaplacian_values(u.values, u.grid))


@dataclass
class SpectralEstimate:
    value: float
    converged: bool
    iterations: int


def power_iteration(apply: Callable[[np.ndarray], np.ndarray], start: np.ndarray,
                    max_iter: int = 200, tol: float = 1e-6, min_iter: int = 20) -> SpectralEstimate:
    """Rayleigh-quotient power iteration for a symmetric positive semidefinite operator."""
    norm = math.sqrt(float(np.vdot(start, start).real))
    if norm == 0.0:
        raise InputError("power iteration needs a nonzero start vector")
    v = start / norm
    estimate = 0.0
    for it in range(1, max_iter + 1):
        w = apply(v)
        previous, estimate = estimate, float(np.vdot(v, w).real)
        w_norm = math.sqrt(float(np.vdot(w, w).real))
        if w_norm == 0.0:
            return SpectralEstimate(0.0, True, it)
        v = w / w_norm
        if it >= min_iter and abs(estimate - previous) < tol * abs(estimate):
            return SpectralEstimate(estimate, True, it)
    return SpectralEstimate(estimate, False, max_iter)


def closed_form_bound(grid: BoxGrid) -> float:
    """Upper bound on the largest eigenvalue of -L_h.

    |X_i^+ u| <= (2/h_x + 2 max|2 y_i| / h_s) |u| by the triangle inequality
    and |D^+| <= 2/h, likewise for Y_i^+; squaring gives 4/h_x^2 +
    16 max y_i^2 / h_s^2 plus the cross term 16 max|y_i| / (h_x h_s).
    """
    x_max = grid.L_xy - 0.5 * grid.h_x
    y_max = grid.L_xy - 0.5 * grid.h_y
    per_index = ((2.0 / grid.h_x + 4.0 * y_max / grid.h_s) ** 2
                 + (2.0 / grid.h_y + 4.0 * x_max / grid.h_s) ** 2)
    return grid.n * per_index


@functools.lru_cache(maxsize=32)
def spectral_bound(grid: BoxGrid) -> float:
    rng = np.random.default_rng(Config.RANDOM_SEED)
    start = rng.standard_normal(grid.shape).astype(complex)
    result = power_iteration(lambda a: -sublaplacian_values(a, grid), start,
                             max_iter=Config.POWER_MAX_ITER, tol=Config.POWER_TOL)
    if not result.converged:
        bound = closed_form_bound(grid)
        logger.warning("power iteration did not converge after %d iterations (last %.6g); "
                       "using closed-form bound %.6g", result.iterations, result.value, bound)
        return bound
    logger.debug("spectral bound %.6g after %d iterations", result.value, result.iterations)
    return result.value


def sbp_defect(u: Field) -> float:
    """|<L_h u, u> + |grad_H u|^2|, zero to rounding."""
    return abs(inner(sublaplacian(u), u) + grad_h(u).norm_sq())
