"""Discretization grids shared by the quantizers and the Hilbert-field code.

The polar grid uses ``s = log(lam)`` with ``lam = ||q||^2`` so that radial
dilations become index shifts.  Grid points are ``s_i = s_min + i ds`` with
``ds = (s_max - s_min) / S`` (right endpoint excluded), and ``theta_j =
2 pi j / M``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

__all__ = [
    "FD1",
    "FD2",
    "STENCIL_HALF",
    "GridMismatchError",
    "OffGridError",
    "PolarGrid",
    "PolarSection",
    "CartesianGrid",
    "CartesianGridFunction",
    "d_s",
    "d_s2",
    "d_theta",
    "spectral_derivative",
]

#: 8th-order central first-derivative weights (multiply by 1/h)
FD1 = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])
#: 8th-order central second-derivative weights (multiply by 1/h^2)
FD2 = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560])
STENCIL_HALF = 4


class GridMismatchError(ValueError):
    """Raised when objects living on different grids are combined."""


class OffGridError(ValueError):
    """Raised when a requested point is not a grid point."""


@dataclass(frozen=True)
class PolarGrid:
    """Log-radial by angular grid for the field over ``lam in (0, inf)``.

    Parameters
    ----------
    S, M : int
        Number of log-radial and angular points.
    s_min, s_max : float
        Range of ``s = log(lam)``.
    n : int
        Spatial dimension; the fiber machinery exists for ``n = 2`` only.
    collar : int
        Width (in cells) of the boundary band where test sections vanish.
    """

    S: int = 64
    M: int = 64
    s_min: float = -2.0
    s_max: float = 2.0
    n: int = 2
    collar: int = 5

    def __post_init__(self):
        if self.n != 2:
            raise NotImplementedError("fiber grids are implemented for n = 2 only")
        if self.S < 2 * STENCIL_HALF + 1 or self.M < 4:
            raise ValueError("grid too small")
        if not self.s_min < self.s_max:
            raise ValueError("need s_min < s_max")

    @property
    def ds(self) -> float:
        return (self.s_max - self.s_min) / self.S

    @property
    def s(self) -> np.ndarray:
        return self.s_min + self.ds * np.arange(self.S)

    @property
    def theta(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.M) / self.M

    @property
    def lam(self) -> np.ndarray:
        return np.exp(self.s)

    @property
    def r(self) -> np.ndarray:
        return np.exp(0.5 * self.s)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.S, self.M)

    # quadrature -------------------------------------------------------------
    @property
    def fiber_weight(self) -> float:
        """Angular quadrature weight of the fiber measure (constant for n = 2)."""
        return math.pi / self.M

    @property
    def v_weight(self) -> float:
        """Quadrature weight of the trivialized fiber space ``L^2(S^1)``."""
        return 2.0 * math.pi / self.M

    @property
    def lam_weights(self) -> np.ndarray:
        """Weights for ``d lam = e^s ds``."""
        return self.lam * self.ds

    @property
    def cell_weights(self) -> np.ndarray:
        """Direct-integral weights per grid point, shape ``(S, 1)``."""
        return (self.lam_weights * self.fiber_weight)[:, None]

    # helpers ------------------------------------------------------------------
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """``(s, theta)`` arrays of shape ``(S, M)``."""
        return np.meshgrid(self.s, self.theta, indexing="ij")

    def cartesian_points(self) -> tuple[np.ndarray, np.ndarray]:
        s, th = self.mesh()
        r = np.exp(0.5 * s)
        return r * np.cos(th), r * np.sin(th)

    def shift_index(self, t: float) -> int | None:
        """Index shift ``k = 2 t / ds`` if integral (to 1e-9), else ``None``."""
        k = 2.0 * t / self.ds
        kr = round(k)
        return int(kr) if abs(k - kr) <= 1e-9 else None

    def index_of_s(self, s: float) -> int:
        u = (s - self.s_min) / self.ds
        i = round(u)
        if abs(u - i) > 1e-9 or not 0 <= i < self.S:
            raise OffGridError(f"s={s!r} is not a grid point")
        return int(i)

    def index_of_lam(self, lam: float) -> int:
        return self.index_of_s(math.log(lam))

    def interior(self, width: int = STENCIL_HALF) -> np.ndarray:
        return np.arange(width, self.S - width)

    def meta(self) -> dict:
        return {"n": self.n, "S": self.S, "M": self.M,
                "s_min": self.s_min, "s_max": self.s_max}

    def section(self, values) -> "PolarSection":
        return PolarSection(self, values)

    def zeros(self) -> "PolarSection":
        return PolarSection(self, np.zeros(self.shape, dtype=np.complex128))


@dataclass(frozen=True, eq=False)
class PolarSection:
    """Grid values ``phi(lam_i, theta_j)`` of a section (or a function on the plane)."""

    grid: PolarGrid
    values: np.ndarray
    interpolated: bool = field(default=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("section values must be finite")
        object.__setattr__(self, "values", v)

    def _check(self, other: "PolarSection") -> None:
        if self.grid != other.grid:
            raise GridMismatchError("sections live on different grids")

    def __add__(self, other: "PolarSection") -> "PolarSection":
        self._check(other)
        return PolarSection(self.grid, self.values + other.values)

    def __sub__(self, other: "PolarSection") -> "PolarSection":
        self._check(other)
        return PolarSection(self.grid, self.values - other.values)

    def __mul__(self, c) -> "PolarSection":
        return PolarSection(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self) -> "PolarSection":
        return PolarSection(self.grid, -self.values)

    def collar_max(self, width: int | None = None) -> float:
        """Largest modulus on the boundary collar."""
        w = self.grid.collar if width is None else width
        v = np.abs(self.values)
        return float(max(v[:w].max(initial=0.0), v[self.grid.S - w:].max(initial=0.0)))


# ---------------------------------------------------------------------------
# derivatives on the polar grid
# ---------------------------------------------------------------------------


def _as_batch(values: np.ndarray, S: int, M: int) -> tuple[np.ndarray, tuple]:
    v = np.asarray(values, dtype=np.complex128)
    if v.shape[-2:] != (S, M):
        raise ValueError("trailing axes must be (S, M)")
    return v.reshape(-1, S, M), v.shape


def d_s(values: np.ndarray, grid: PolarGrid) -> np.ndarray:
    """8th-order central ``d/ds`` along the log-radial axis, zero padding."""
    b, shape = _as_batch(values, grid.S, grid.M)
    return _kernels.stencil_axis(b, FD1 / grid.ds).reshape(shape)


def d_s2(values: np.ndarray, grid: PolarGrid) -> np.ndarray:
    """8th-order central ``d^2/ds^2``, zero padding."""
    b, shape = _as_batch(values, grid.S, grid.M)
    return _kernels.stencil_axis(b, FD2 / grid.ds ** 2).reshape(shape)


def spectral_derivative(values: np.ndarray, axis: int, length: float, order: int = 1,
                        keep_nyquist: bool = False) -> np.ndarray:
    """Fourier derivative of periodic data along ``axis`` with period ``length``.

    For odd orders the Nyquist mode is dropped unless ``keep_nyquist``.
    """
    v = np.asarray(values, dtype=np.complex128)
    N = v.shape[axis]
    k = 2.0 * np.pi * np.fft.fftfreq(N, d=length / N)
    mult = (1j * k) ** order
    if order % 2 == 1 and N % 2 == 0 and not keep_nyquist:
        mult[N // 2] = 0.0
    shape = [1] * v.ndim
    shape[axis] = N
    return np.fft.ifft(np.fft.fft(v, axis=axis) * mult.reshape(shape), axis=axis)


def d_theta(values: np.ndarray, order: int = 1) -> np.ndarray:
    """Spectral ``d^order/dtheta^order`` along the last axis."""
    return spectral_derivative(values, -1, 2.0 * np.pi, order)


# ---------------------------------------------------------------------------
# Cartesian grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CartesianGrid:
    """Uniform box grid in ``R^n`` with ``x_k = -L + (k + 1/2) dx``."""

    n: int = 1
    N: int = 64
    L: float = 8.0

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError("Cartesian grids support n in {1, 2}")
        if self.N < 2 or self.L <= 0:
            raise ValueError("need N >= 2 and L > 0")

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def x(self) -> np.ndarray:
        return -self.L + (np.arange(self.N) + 0.5) * self.dx

    @property
    def size(self) -> int:
        return self.N ** self.n

    @property
    def momenta(self) -> np.ndarray:
        """Discrete-Fourier dual momenta in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.N, d=self.dx)

    def points(self) -> np.ndarray:
        """Grid points, shape ``(N^n, n)`` in C order."""
        axes = np.meshgrid(*([self.x] * self.n), indexing="ij")
        return np.stack([a.ravel() for a in axes], axis=-1)

    def dual(self) -> "CartesianGrid":
        """Grid of the unitary centered DFT: half-width ``pi / dx``."""
        return CartesianGrid(self.n, self.N, math.pi / self.dx)

    def meta(self) -> dict:
        return {"kind": "cartesian", "n": self.n, "N": self.N, "L": self.L}

    def sample(self, f) -> "CartesianGridFunction":
        """Sample a callable ``f(x)`` with ``x`` of shape ``(P, n)``."""
        return CartesianGridFunction(self, np.asarray(f(self.points()), dtype=np.complex128))


@dataclass(frozen=True, eq=False)
class CartesianGridFunction:
    """Values of a function on a :class:`CartesianGrid` (flattened, C order)."""

    grid: CartesianGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128).reshape(-1)
        if v.shape[0] != self.grid.size:
            raise ValueError("wrong number of values for grid")
        object.__setattr__(self, "values", v)

    def norm(self) -> float:
        return float(np.linalg.norm(self.values) * self.grid.dx ** (self.grid.n / 2))

    def inner(self, other: "CartesianGridFunction") -> complex:
        """``<self, other>`` linear in the second slot."""
        if self.grid != other.grid:
            raise GridMismatchError("functions live on different grids")
        return complex(np.vdot(self.values, other.values) * self.grid.dx ** self.grid.n)
