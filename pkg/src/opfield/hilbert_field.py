"""The field of Hilbert spaces over the spectrum of ``Q^2`` on a polar grid.

A section is stored by its values on the circles ``||q||^2 = lam_i`` at the
angles ``theta_j``.  The fiber measure is normalized so that the
trivialization ``T`` (multiplication by ``2^{-1/2} lam^{(n-2)/4}``) is an
isometry from each fiber onto ``L^2(S^1, dtheta)``.  For ``n = 2`` that gives
the angular quadrature weight ``pi / M`` on every fiber, and the direct
integral over ``d lam`` then reproduces the Lebesgue measure on the plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .grids import (
    FD1,
    STENCIL_HALF,
    CartesianGrid,
    CartesianGridFunction,
    GridMismatchError,
    OffGridError,
    PolarGrid,
    PolarSection,
    d_s,
)
from .phase_space import RadialVectorField, radial_lift
from .weyl import DenseOperator, DilationOperator, _fourier_interp_matrix

__all__ = [
    "BoundarySupportError",
    "CoverageError",
    "TrivializedSection",
    "trivialization_weight",
    "trivialize",
    "untrivialize",
    "trivialize_function",
    "fiber_inner",
    "fiber_norms",
    "direct_integral_inner",
    "direct_integral_norm",
    "connection_correction",
    "connection_apply",
    "connection_values",
    "valid_rows",
    "s_derivative_1d",
    "leibniz_defect",
    "seminorm",
    "flow_transport",
    "dilation_group",
    "hx_apply",
    "hx_symmetry_defect",
    "HorizontalResult",
    "horizontal_test",
    "resample_cartesian",
    "resample_polar",
    "fourier_matrix",
    "fourier_conjugate",
]


class BoundarySupportError(ValueError):
    """Raised when a section does not vanish on the boundary collar."""


class CoverageError(ValueError):
    """Raised when a Cartesian grid does not cover the polar annulus."""


# ---------------------------------------------------------------------------
# trivialization and inner products
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TrivializedSection:
    """Values ``(T phi)(lam_i, theta_j)`` in the fixed space ``V = L^2(S^1)``."""

    grid: PolarGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} != grid shape {self.grid.shape}")
        object.__setattr__(self, "values", v)

    def fiber_norms(self) -> np.ndarray:
        return np.sqrt(np.sum(np.abs(self.values) ** 2, axis=1) * self.grid.v_weight)


def trivialization_weight(lam, n: int):
    """``2^{-1/2} lam^{(n-2)/4}``."""
    return 2 ** -0.5 * np.asarray(lam, dtype=float) ** ((n - 2) / 4)


def trivialize(phi: PolarSection) -> TrivializedSection:
    w = trivialization_weight(phi.grid.lam, phi.grid.n)[:, None]
    return TrivializedSection(phi.grid, phi.values * w)


def untrivialize(f: TrivializedSection) -> PolarSection:
    w = trivialization_weight(f.grid.lam, f.grid.n)[:, None]
    return PolarSection(f.grid, f.values / w)


def trivialize_function(f, lam: float, z, n: int):
    """``(T f)(lam, z)`` for a callable ``f`` on ``R^n`` and unit vectors ``z``."""
    z = np.asarray(z, dtype=float)
    return trivialization_weight(lam, n) * f(math.sqrt(lam) * z)


def _check_same(a: PolarSection, b: PolarSection) -> None:
    if a.grid != b.grid:
        raise GridMismatchError("sections live on different grids")


def fiber_inner(phi: PolarSection, psi: PolarSection, i: int | None = None):
    """Fiber inner product ``<phi(lam_i), psi(lam_i)>``, antilinear in ``phi``.

    Returns all fibers (shape ``(S,)``) when ``i`` is None.
    """
    _check_same(phi, psi)
    row = np.sum(np.conj(phi.values) * psi.values, axis=1) * phi.grid.fiber_weight
    return row if i is None else complex(row[i])


def fiber_norms(phi: PolarSection) -> np.ndarray:
    return np.sqrt(np.sum(np.abs(phi.values) ** 2, axis=1) * phi.grid.fiber_weight)


def direct_integral_inner(phi: PolarSection, psi: PolarSection) -> complex:
    """``int <phi(lam), psi(lam)> d lam`` by the grid quadrature."""
    _check_same(phi, psi)
    return complex(np.sum(np.conj(phi.values) * psi.values * phi.grid.cell_weights))


def direct_integral_norm(phi: PolarSection) -> float:
    return math.sqrt(max(direct_integral_inner(phi, phi).real, 0.0))


# ---------------------------------------------------------------------------
# connection
# ---------------------------------------------------------------------------


def connection_correction(X: RadialVectorField, n: int, lam, formula: str = "A"):
    """Zeroth-order coefficient of the connection as a function of ``lam``.

    ``A``: ``(n-2)/4 * X~(||q||^2) / ||q||^2``, and ``X~(||q||^2) = 2 b lam``.
    ``B``: ``(div X~ - X'(lam)) / 2``.
    """
    lift = radial_lift(X, n)
    lam = np.asarray(lam, dtype=float)
    if formula == "A":
        return (n - 2) / 4 * (2.0 * lift.b(lam) * lam) / lam
    if formula == "B":
        return 0.5 * (lift.divergence(lam) - X.derivative(lam))
    raise ValueError(f"unknown formula {formula!r}")


def valid_rows(grid: PolarGrid, depth: int = 1) -> np.ndarray:
    """Rows unaffected by zero padding after ``depth`` stencil applications."""
    return grid.interior(STENCIL_HALF * depth)


def connection_values(X: RadialVectorField, grid: PolarGrid, values: np.ndarray,
                      formula: str = "A") -> np.ndarray:
    """Connection applied to a batch of grid values ``(..., S, M)`` (no checks)."""
    lam = grid.lam
    b = radial_lift(X, grid.n).b(lam)[:, None]
    c = connection_correction(X, grid.n, lam, formula)[:, None]
    return 2.0 * b * d_s(values, grid) + c * np.asarray(values)


def connection_apply(X: RadialVectorField, phi: PolarSection, formula: str = "A",
                     strict: bool = True) -> PolarSection:
    """``nabla_X phi = b(lam) 2 d_s phi + c(lam) phi``.

    With ``strict`` the input must vanish on the boundary collar; otherwise
    only rows in :func:`valid_rows` are meaningful.
    """
    if strict and phi.collar_max() > 0.0:
        raise BoundarySupportError("section does not vanish on the boundary collar")
    return PolarSection(phi.grid, connection_values(X, phi.grid, phi.values, formula),
                        interpolated=phi.interpolated)


def s_derivative_1d(f: np.ndarray, grid: PolarGrid) -> np.ndarray:
    """``d/ds`` of data indexed by the log-radial rows (leading axis)."""
    f = np.asarray(f, dtype=np.complex128)
    b = f.reshape(1, f.shape[0], -1)
    return _kernels.stencil_axis(np.ascontiguousarray(b), FD1 / grid.ds).reshape(f.shape)


def leibniz_defect(X: RadialVectorField, phi: PolarSection, psi: PolarSection,
                   formula: str = "A") -> float:
    """``max_i |X h(phi, psi) - h(nabla phi, psi) - h(phi, nabla psi)|`` (real ``X``)."""
    strict = phi.collar_max() == 0.0 and psi.collar_max() == 0.0
    g = phi.grid
    h = fiber_inner(phi, psi)
    Xh = X(g.lam) / g.lam * s_derivative_1d(h, g)
    dphi = connection_apply(X, phi, formula, strict=False)
    dpsi = connection_apply(X, psi, formula, strict=False)
    d = Xh - fiber_inner(dphi, psi) - fiber_inner(phi, dpsi)
    rows = np.arange(g.S) if strict else valid_rows(g, 1)
    return float(np.max(np.abs(d[rows])))


def seminorm(phi: PolarSection, C: tuple[float, float] | None = None,
             Xs: Sequence[RadialVectorField] = (), formula: str = "A") -> float:
    """``sup_{lam in C} ||nabla_X1 ... nabla_Xm phi(lam)||`` over grid points.

    ``C = None`` means the whole grid.  Rows polluted by zero padding are
    excluded when ``phi`` is not interior-supported.
    """
    g = phi.grid
    if len(Xs) > 3:
        raise ValueError("at most three derivatives")
    lam = g.lam
    mask = np.ones(g.S, dtype=bool)
    if C is not None:
        lo, hi = C
        tol = 1e-12 * max(1.0, abs(hi))
        if lo > hi or lo < lam[0] - tol or hi > lam[-1] + tol:
            raise OffGridError(f"interval {C} outside the grid range [{lam[0]}, {lam[-1]}]")
        mask &= (lam >= lo * (1 - 1e-12)) & (lam <= hi * (1 + 1e-12))
    cur = phi
    for X in reversed(list(Xs)):
        cur = connection_apply(X, cur, formula, strict=False)
    if Xs and phi.collar_max() > 0.0:
        # zero padding is only exact for sections vanishing near the edges
        keep = np.zeros(g.S, dtype=bool)
        keep[valid_rows(g, len(Xs))] = True
        mask &= keep
    if not mask.any():
        raise OffGridError("no valid grid rows in the interval")
    return float(np.max(fiber_norms(cur)[mask]))


def flow_transport(t: float, phi: PolarSection) -> PolarSection:
    """``R_t phi(q) = e^{(n-2)t/2} phi(e^t q)`` (pure shift for ``n = 2``)."""
    op = DilationOperator(phi.grid, t, (phi.grid.n - 2) / 2)
    return op(phi)


def dilation_group(t: float, phi: PolarSection) -> PolarSection:
    """``W_t phi(q) = e^{n t/2} phi(e^t q)``, unitary on the direct integral."""
    op = DilationOperator(phi.grid, t, phi.grid.n / 2)
    return op(phi)


def hx_apply(X: RadialVectorField, phi: PolarSection, formula: str = "A",
             strict: bool = True) -> PolarSection:
    """``H_X phi = -i (nabla_X + div(X)/2) phi`` with ``div X = a'`` for ``d lam``."""
    d = connection_apply(X, phi, formula, strict)
    div = X.derivative(phi.grid.lam)[:, None]
    return PolarSection(phi.grid, -1j * (d.values + 0.5 * div * phi.values))


def hx_symmetry_defect(X: RadialVectorField, phi: PolarSection, psi: PolarSection) -> float:
    """``|<H_X phi, psi> - <phi, H_X psi>|`` on interior-supported sections."""
    return abs(direct_integral_inner(hx_apply(X, phi), psi)
               - direct_integral_inner(phi, hx_apply(X, psi)))


@dataclass(frozen=True)
class HorizontalResult:
    """Outcome of :func:`horizontal_test`."""

    horizontal: bool
    defect: float
    homogeneity_defect: float

    def __bool__(self) -> bool:
        return self.horizontal


def horizontal_test(phi: PolarSection, tol: float = 1e-8) -> HorizontalResult:
    """Seminorm of ``nabla_X0 phi`` plus a direct check ``phi(4 lam) = phi(lam)``.

    The homogeneity check resamples ``s -> s + log 4`` with a cubic spline in
    ``s`` on rows where both points are on the grid.
    """
    from scipy.interpolate import CubicSpline

    g = phi.grid
    defect = seminorm(phi, None, [RadialVectorField.x0()])
    shift = math.log(4.0)
    s = g.s
    rows = np.nonzero(s + shift <= s[-1])[0]
    spline = CubicSpline(s, phi.values, axis=0)
    moved = spline(s[rows] + shift) * 4.0 ** (-(g.n - 2) / 2)
    homog = float(np.max(np.abs(moved - phi.values[rows]))) if len(rows) else 0.0
    return HorizontalResult(defect <= tol, defect, homog)


# ---------------------------------------------------------------------------
# resampling between grids
# ---------------------------------------------------------------------------


def _check_coverage(pgrid: PolarGrid, cgrid: CartesianGrid) -> None:
    if cgrid.n != 2:
        raise CoverageError("polar resampling needs a 2-D Cartesian grid")
    r_max = math.exp(0.5 * pgrid.s[-1])
    if cgrid.x[-1] < r_max:
        raise CoverageError(f"Cartesian box half-width {cgrid.L} does not cover r <= {r_max:.4f}")


def resample_cartesian(phi: PolarSection, grid: CartesianGrid) -> CartesianGridFunction:
    """Bicubic (Keys) interpolation from the polar grid to Cartesian points.

    Points outside the sampled annulus get zero.
    """
    pg = phi.grid
    _check_coverage(pg, grid)
    pts = grid.points()
    r2 = np.sum(pts ** 2, axis=1)
    out = np.zeros(len(pts), dtype=np.complex128)
    inside = (r2 >= pg.lam[0]) & (r2 <= pg.lam[-1])
    s = np.log(r2[inside])
    th = np.mod(np.arctan2(pts[inside, 1], pts[inside, 0]), 2 * np.pi)
    u0 = (s - pg.s_min) / pg.ds
    u1 = th / (2 * np.pi / pg.M)
    out[inside] = _kernels.cubic_interp2(phi.values, u0, u1, True)
    return CartesianGridFunction(grid, out)


def resample_polar(f: CartesianGridFunction, grid: PolarGrid,
                   method: str = "spectral") -> PolarSection:
    """Values of a Cartesian grid function at the polar grid points.

    ``spectral`` uses trigonometric interpolation of the periodized data
    (exact for band-limited functions); ``cubic`` uses Keys interpolation.
    """
    cg = f.grid
    _check_coverage(grid, cg)
    x, y = grid.cartesian_points()
    if method == "cubic":
        u0 = (x + cg.L) / cg.dx - 0.5
        u1 = (y + cg.L) / cg.dx - 0.5
        vals = _kernels.cubic_interp2(f.values.reshape(cg.N, cg.N), u0, u1, False)
    elif method == "spectral":
        F = f.values.reshape(cg.N, cg.N)
        Ex = _fourier_interp_matrix(cg.x, x.ravel(), cg.dx)
        Ey = _fourier_interp_matrix(cg.x, y.ravel(), cg.dx)
        vals = np.einsum("pk,kl,pl->p", Ex, F, Ey).reshape(grid.shape)
    else:
        raise ValueError(f"unknown method {method!r}")
    return PolarSection(grid, vals)


# ---------------------------------------------------------------------------
# Fourier conjugation
# ---------------------------------------------------------------------------


def fourier_matrix(grid: CartesianGrid) -> np.ndarray:
    """Unitary DFT ``F[m, k] = N^{-1/2} exp(-i xi_m x_k)`` onto ``grid.dual()``.

    For ``n = 2`` the tensor product is returned.
    """
    x = grid.x
    xi = grid.dual().x
    F1 = np.exp(-1j * np.outer(xi, x)) / math.sqrt(grid.N)
    return np.kron(F1, F1) if grid.n == 2 else F1


def fourier_conjugate(O: DenseOperator, grid: CartesianGrid | None = None) -> DenseOperator:
    """``F O F^{-1}`` as an operator on the dual grid."""
    grid = grid or O.grid
    if O.grid != grid:
        raise GridMismatchError("operator lives on a different grid")
    F = fourier_matrix(grid)
    return DenseOperator(grid.dual(), F @ O.matrix @ F.conj().T)
