"""
Truncated box discretization of H^n and the discrete L^2 pairing.

Field values are stored as a complex array of shape
(N_x,)*n + (N_y,)*n + (N_s,), axes ordered x_1..x_n, y_1..y_n, s with s
fastest-varying in C order. Every sum goes through `tree_sum` so results
are bit-reproducible.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Tuple, Union

import numpy as np

from app.models.errors import InputError
from app.models.hgroup import GroupPoint, TestFunction

logger = logging.getLogger(__name__)

BOUNDARY_CONDITIONS = ("dirichlet", "periodic", "mixed")


@dataclass(frozen=True)
class BoxGrid:
    n: int = 1
    N_x: int = 33
    N_y: int = 33
    N_s: int = 33
    L_xy: float = 6.0
    L_s: float = 12.0
    bc: str = "dirichlet"

    def __post_init__(self):
        if self.n < 1:
            raise InputError(f"group parameter n must be >= 1, got {self.n}")
        for name in ("N_x", "N_y", "N_s"):
            if getattr(self, name) < 4:
                raise InputError(f"{name} must be >= 4, got {getattr(self, name)}")
        if not (self.L_xy > 0 and self.L_s > 0):
            raise InputError(f"half-widths must be positive, got L_xy={self.L_xy}, L_s={self.L_s}")
        if self.bc not in BOUNDARY_CONDITIONS:
            raise InputError(f"bc must be one of {BOUNDARY_CONDITIONS}, got {self.bc!r}")

    @property
    def h_x(self) -> float:
        return 2.0 * self.L_xy / self.N_x

    @property
    def h_y(self) -> float:
        return 2.0 * self.L_xy / self.N_y

    @property
    def h_s(self) -> float:
        return 2.0 * self.L_s / self.N_s

    @property
    def h_vol(self) -> float:
        return self.h_x ** self.n * self.h_y ** self.n * self.h_s

    @property
    def ndim(self) -> int:
        return 2 * self.n + 1

    @property
    def s_axis(self) -> int:
        return 2 * self.n

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.N_x,) * self.n + (self.N_y,) * self.n + (self.N_s,)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def spacing(self, axis: int) -> float:
        if axis < self.n:
            return self.h_x
        if axis < 2 * self.n:
            return self.h_y
        return self.h_s

    def half_width(self, axis: int) -> float:
        return self.L_s if axis == self.s_axis else self.L_xy

    def is_periodic(self, axis: int) -> bool:
        return self.bc == "periodic" or (self.bc == "mixed" and axis == self.s_axis)

    def axis_coordinates(self, axis: int) -> np.ndarray:
        """Cell centres -L + (j + 1/2) h along one axis."""
        count = self.shape[axis]
        h = self.spacing(axis)
        return -self.half_width(axis) + (np.arange(count) + 0.5) * h

    def coordinate_array(self, axis: int) -> np.ndarray:
        """Axis coordinates reshaped to broadcast against field values."""
        shape = [1] * self.ndim
        shape[axis] = self.shape[axis]
        return self.axis_coordinates(axis).reshape(shape)

    def points(self) -> np.ndarray:
        """Dense coordinates with shape (2n+1, *grid.shape)."""
        return np.stack(np.meshgrid(*[self.axis_coordinates(a) for a in range(self.ndim)], indexing="ij"))

    def coordinates(self, idx: Sequence[int]) -> GroupPoint:
        idx = tuple(int(j) for j in idx)
        if len(idx) != self.ndim or any(not 0 <= j < c for j, c in zip(idx, self.shape)):
            raise InputError(f"multi-index {idx} out of bounds for grid shape {self.shape}")
        z = [self.axis_coordinates(a)[j] for a, j in enumerate(idx)]
        return GroupPoint.from_vector(z)

    def mirror(self, idx: Sequence[int]) -> Tuple[int, ...]:
        return tuple(c - 1 - int(j) for j, c in zip(idx, self.shape))

    def header(self) -> str:
        return f"{self.n},{self.N_x},{self.N_y},{self.N_s},{self.L_xy!r},{self.L_s!r},{self.bc}"


@dataclass
class Field:
    grid: BoxGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != self.grid.shape:
            raise InputError(f"field shape {values.shape} does not match grid {self.grid.shape}")
        self.values = values

    @property
    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    @classmethod
    def zeros(cls, grid: BoxGrid) -> "Field":
        return cls(grid, np.zeros(grid.shape, dtype=complex))

    @classmethod
    def constant(cls, grid: BoxGrid, value: complex) -> "Field":
        return cls(grid, np.full(grid.shape, value, dtype=complex))

    @classmethod
    def sample(cls, grid: BoxGrid, f: TestFunction) -> "Field":
        if f.dim != grid.ndim:
            raise InputError(f"{f.name} has dimension {f.dim}, grid has {grid.ndim}")
        return cls(grid, f(grid.points()))

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(self.grid, values)

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())


def tree_sum(values: np.ndarray):
    """Pairwise sum in a fixed binary-tree order, independent of any threading."""
    flat = np.ravel(values)
    if flat.size == 0:
        return flat.dtype.type(0)
    width = 1 << (flat.size - 1).bit_length()
    buf = np.zeros(width, dtype=flat.dtype)
    buf[:flat.size] = flat
    while buf.size > 1:
        buf = buf[0::2] + buf[1::2]
    return buf[0]


def _check_same_grid(u: Field, v: Field):
    if u.grid != v.grid:
        raise InputError("fields live on different grids")


def inner(u: Field, v: Field) -> complex:
    """<u, v> = sum u conj(v) h_vol."""
    _check_same_grid(u, v)
    return complex(tree_sum(u.values * np.conj(v.values))) * u.grid.h_vol


def l2_norm_sq(u: Field) -> float:
    return float(tree_sum(u.values.real ** 2 + u.values.imag ** 2)) * u.grid.h_vol


def linf_norm(u: Field) -> float:
    return float(np.max(np.abs(u.values)))


def integrate(grid: BoxGrid, density: np.ndarray) -> float:
    """Real part of sum(density) h_vol, used for the potential term."""
    return float(np.real(tree_sum(np.asarray(density)))) * grid.h_vol


def write_snapshot(field: Field, path: Union[str, Path]) -> Path:
    """Write values in axis order; `.bin` is raw complex128, anything else CSV."""
    path = Path(path)
    header = field.grid.header()
    flat = np.ravel(field.values)
    if path.suffix == ".bin":
        with open(path, "wb") as handle:
            handle.write((header + "\n").encode("ascii"))
            handle.write(flat.astype("<c16").tobytes())
    else:
        np.savetxt(path, np.column_stack([flat.real, flat.imag]), fmt="%.17g", delimiter=",",
                   header=header, comments="")
    logger.debug("wrote snapshot %s (%d values)", path, flat.size)
    return path


def _grid_from_header(line: str) -> BoxGrid:
    parts = line.strip().split(",")
    if len(parts) != 7:
        raise InputError(f"snapshot header must have 7 fields n,N_x,N_y,N_s,L_xy,L_s,bc: {line!r}")
    n, nx, ny, ns = (int(p) for p in parts[:4])
    return BoxGrid(n=n, N_x=nx, N_y=ny, N_s=ns, L_xy=float(parts[4]), L_s=float(parts[5]), bc=parts[6])


def read_snapshot(path: Union[str, Path]) -> Field:
    path = Path(path)
    if path.suffix == ".bin":
        with open(path, "rb") as handle:
            grid = _grid_from_header(handle.readline().decode("ascii"))
            flat = np.frombuffer(handle.read(), dtype="<c16")
    else:
        with open(path) as handle:
            grid = _grid_from_header(handle.readline())
        pairs = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        flat = pairs[:, 0] + 1j * pairs[:, 1]
    if flat.size != grid.size:
        raise InputError(f"snapshot holds {flat.size} values, grid needs {grid.size}")
    return Field(grid, flat.reshape(grid.shape))
