"""Fields of operators over the fibers and the induced connection.

Operators on sections are turned into families of ``M x M`` fiber matrices
acting on trivialized angular values.  The derivative of such a family along
``X = a(lam) d/dlam`` is computed by two routes:

* the commutator ``[nabla_X, O]`` applied to smooth extensions of the fiber
  basis vectors (:func:`nabla_hat_commutator`), and
* the finite-difference derivative of ``lam -> A(lam)`` in trivialized
  coordinates (:func:`nabla_hat_trivialized`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .battery import multiplier_bumps, section_battery
from .grids import (
    FD1,
    STENCIL_HALF,
    GridMismatchError,
    OffGridError,
    PolarGrid,
    PolarSection,
)
from .hilbert_field import (
    connection_apply,
    connection_values,
    direct_integral_inner,
    direct_integral_norm,
    flow_transport,
)
from .phase_space import (
    PolySymbol,
    RadialVectorField,
    is_constant_of_motion,
    norm_q2,
    poisson_connection_apply,
    radial_lift,
)
from .weyl import quantize_diffop

__all__ = [
    "ExcessiveLeakageError",
    "GlobalOperator",
    "OperatorField",
    "decomposability_defect",
    "extract_fibers",
    "nabla_hat_commutator",
    "nabla_hat_trivialized",
    "HorizontalityReport",
    "horizontality_report",
    "parallel_transport_conjugate",
    "TransportEstimate",
    "transport_estimate_check",
    "DerivativeFormulaReport",
    "derivative_formula_check",
    "PointwiseWeakReport",
    "pointwise_weak_derivative_check",
    "rank_one_field",
    "rank_one_derivative_defect",
    "norm_continuity_modulus",
    "local_sup_norm",
    "plateau_extension",
]

LEAKAGE_TOL = 1e-10


class ExcessiveLeakageError(ValueError):
    """Raised when an operator is too far from acting fiberwise."""


class GlobalOperator(Protocol):
    """Linear map on polar-grid values with trailing shape ``(S, M)``."""

    grid: PolarGrid

    def apply(self, values: np.ndarray) -> np.ndarray: ...


# ---------------------------------------------------------------------------
# operator fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OperatorField:
    """Fiber matrices ``A(lam_i)`` on the rows ``rows`` of a polar grid.

    Parameters
    ----------
    grid : PolarGrid
    fibers : ndarray, shape (K, M, M)
        Matrices acting on trivialized fiber values.
    rows : ndarray of int, optional
        Grid rows the fibers belong to; defaults to all rows.
    """

    grid: PolarGrid
    fibers: np.ndarray
    rows: np.ndarray | None = None

    def __post_init__(self):
        F = np.asarray(self.fibers, dtype=np.complex128)
        rows = np.arange(self.grid.S) if self.rows is None else np.asarray(self.rows, dtype=int)
        M = self.grid.M
        if F.shape != (len(rows), M, M):
            raise ValueError(f"fibers shape {F.shape} does not match {len(rows)} rows of {M}x{M}")
        if not np.all(np.isfinite(F)):
            raise ValueError("fiber entries must be finite")
        object.__setattr__(self, "fibers", F)
        object.__setattr__(self, "rows", rows)

    @property
    def lam(self) -> np.ndarray:
        return self.grid.lam[self.rows]

    def norms(self) -> np.ndarray:
        """Operator norm of each fiber."""
        return np.linalg.norm(self.fibers, ord=2, axis=(1, 2))

    def adjoint(self) -> "OperatorField":
        return OperatorField(self.grid, np.conj(np.swapaxes(self.fibers, 1, 2)), self.rows)

    def restrict(self, rows) -> "OperatorField":
        rows = np.asarray(rows, dtype=int)
        pos = {int(r): k for k, r in enumerate(self.rows)}
        try:
            idx = [pos[int(r)] for r in rows]
        except KeyError as exc:
            raise ValueError(f"row {exc} not in field") from None
        return OperatorField(self.grid, self.fibers[idx], rows)

    def _common(self, other: "OperatorField") -> tuple["OperatorField", "OperatorField"]:
        if self.grid != other.grid:
            raise GridMismatchError("fields live on different grids")
        rows = np.intersect1d(self.rows, other.rows)
        return self.restrict(rows), other.restrict(rows)

    def __add__(self, other: "OperatorField") -> "OperatorField":
        a, b = self._common(other)
        return OperatorField(self.grid, a.fibers + b.fibers, a.rows)

    def __sub__(self, other: "OperatorField") -> "OperatorField":
        a, b = self._common(other)
        return OperatorField(self.grid, a.fibers - b.fibers, a.rows)

    def __matmul__(self, other: "OperatorField") -> "OperatorField":
        a, b = self._common(other)
        return OperatorField(self.grid, a.fibers @ b.fibers, a.rows)

    def __mul__(self, c) -> "OperatorField":
        return OperatorField(self.grid, self.fibers * c, self.rows)

    __rmul__ = __mul__

    def scale_rows(self, f) -> "OperatorField":
        """Multiply fiber ``i`` by ``f[i]`` (``f`` sampled on the field's rows)."""
        f = np.asarray(f)
        return OperatorField(self.grid, self.fibers * f[:, None, None], self.rows)

    def max_norm(self) -> float:
        return float(self.norms().max(initial=0.0))

    def apply(self, values) -> np.ndarray:
        """Act fiberwise on section values; the input must vanish off ``rows``."""
        v = np.asarray(values.values if hasattr(values, "values") else values, dtype=np.complex128)
        off = np.ones(self.grid.S, dtype=bool)
        off[self.rows] = False
        if np.any(v[..., off, :] != 0):
            raise ValueError("section is supported outside the field's rows")
        out = np.zeros_like(v)
        out[..., self.rows, :] = np.einsum("kij,...kj->...ki", self.fibers, v[..., self.rows, :])
        return out


# ---------------------------------------------------------------------------
# decomposability and extraction
# ---------------------------------------------------------------------------


def _battery_values(grid: PolarGrid, battery=None) -> np.ndarray:
    sections = battery if battery is not None else section_battery(grid)
    return np.stack([s.values if hasattr(s, "values") else s for s in sections])


def decomposability_defect(O: GlobalOperator, battery=None,
                           bumps: Sequence[np.ndarray] | None = None) -> float:
    """``max_k max_phi ||O(f_k phi) - f_k O(phi)||`` over fixed bumps ``f_k(lam)``."""
    g = O.grid
    vals = _battery_values(g, battery)
    fs = bumps if bumps is not None else multiplier_bumps(g)
    Ov = O.apply(vals)
    worst = 0.0
    for f in fs:
        f = np.asarray(f)[:, None]
        d = O.apply(f * vals) - f * Ov
        for x in d:
            worst = max(worst, direct_integral_norm(PolarSection(g, x)))
    return worst


def extract_fibers(O: GlobalOperator) -> tuple[OperatorField, float]:
    """Fiber matrices from the response to ``delta_i (x) e_k`` basis sections.

    Returns the field and the leakage, the Frobenius norm of all responses
    outside the input row.
    """
    g = O.grid
    S, M = g.shape
    fibers = np.empty((S, M, M), dtype=np.complex128)
    leak2 = 0.0
    idx = np.arange(M)
    for i in range(S):
        basis = np.zeros((M, S, M), dtype=np.complex128)
        basis[idx, i, idx] = 1.0
        R = O.apply(basis)
        fibers[i] = R[:, i, :].T
        R[:, i, :] = 0.0
        leak2 += float(np.sum(np.abs(R) ** 2))
    return OperatorField(g, fibers), math.sqrt(leak2)


def plateau_extension(grid: PolarGrid, i: int, inner: int = 5, outer: int = 12) -> np.ndarray:
    """Smooth radial cutoff equal to 1 within ``inner`` cells of row ``i``.

    It decays to 0 at ``outer`` cells through a ``C^inf`` transition.
    """
    d = np.abs(np.arange(grid.S) - i).astype(float)
    x = np.clip((d - inner) / (outer - inner), 0.0, 1.0)

    def psi(t):
        with np.errstate(divide="ignore"):
            return np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)

    return psi(1 - x) / (psi(1 - x) + psi(x))


def nabla_hat_commutator(X: RadialVectorField, O: GlobalOperator, formula: str = "A",
                         leakage_tol: float = LEAKAGE_TOL,
                         leakage: float | None = None) -> tuple[OperatorField, float]:
    """Fibers of ``[nabla_X, O]`` on interior rows.

    For each row ``i`` the basis vectors ``e_k`` are extended to sections
    ``chi_i(s) e_k`` with a plateau cutoff ``chi_i``, and row ``i`` of
    ``nabla_X(O psi) - O(nabla_X psi)`` is read off.
    """
    g = O.grid
    leak = extract_fibers(O)[1] if leakage is None else leakage
    if leak > leakage_tol:
        raise ExcessiveLeakageError(f"leakage {leak:.3e} exceeds {leakage_tol:.1e}")
    S, M = g.shape
    rows = g.interior(STENCIL_HALF)
    fibers = np.empty((len(rows), M, M), dtype=np.complex128)
    idx = np.arange(M)
    for n_, i in enumerate(rows):
        chi = plateau_extension(g, int(i))
        basis = np.zeros((M, S, M), dtype=np.complex128)
        basis[idx, :, idx] = chi[None, :]
        Opsi = O.apply(basis)
        dpsi = connection_values(X, g, basis, formula)
        dOpsi = connection_values(X, g, Opsi, formula)
        C = dOpsi - O.apply(dpsi)
        fibers[n_] = C[:, i, :].T
    return OperatorField(g, fibers, rows), leak


def nabla_hat_trivialized(X: RadialVectorField, A: OperatorField) -> OperatorField:
    """``a(lam) dA/dlam`` by the 8th-order stencil in ``s``, on interior rows."""
    g = A.grid
    K = len(A.rows)
    h = STENCIL_HALF
    if K < 2 * h + 1:
        raise ValueError("field has too few rows for the stencil")
    if np.any(np.diff(A.rows) != 1):
        raise ValueError("field rows must be contiguous")
    D = np.zeros((K - 2 * h,) + A.fibers.shape[1:], dtype=np.complex128)
    for o, c in zip(range(-h, h + 1), FD1):
        if c:
            D += c * A.fibers[h + o:K - h + o]
    rows = A.rows[h:K - h]
    lam = g.lam[rows]
    scale = X(lam) / lam / g.ds
    return OperatorField(g, D * scale[:, None, None], rows)


# ---------------------------------------------------------------------------
# horizontality
# ---------------------------------------------------------------------------


def parallel_transport_conjugate(A: OperatorField, lam0: float) -> OperatorField:
    """``lam -> U^{-1} A(lam0) U``; the transport is the identity after trivializing."""
    i0 = A.grid.index_of_lam(lam0)
    if i0 not in set(A.rows.tolist()):
        raise OffGridError(f"lam0={lam0} is not a row of the field")
    F0 = A.restrict([i0]).fibers[0]
    return OperatorField(A.grid, np.broadcast_to(F0, A.fibers.shape).copy(), A.rows)


@dataclass(frozen=True)
class HorizontalityReport:
    """Defects of the equivalent horizontality statements and their verdicts."""

    defect_a: float
    defect_b: float
    defect_c: float
    defect_d: float
    tol: float

    @property
    def a(self) -> bool:
        return self.defect_a <= self.tol

    @property
    def b(self) -> bool:
        return self.defect_b <= self.tol

    @property
    def c(self) -> bool:
        return self.defect_c <= self.tol

    @property
    def d(self) -> bool:
        return self.defect_d <= self.tol

    @property
    def consistent(self) -> bool:
        """True when the statements with computable defects agree."""
        return len({self.a, self.b, self.c, self.d}) == 1


def horizontality_report(A: OperatorField | GlobalOperator, lam0_index: int | None = None,
                         tol: float = 1e-8, X: RadialVectorField | None = None,
                         max_mode: int = 3) -> HorizontalityReport:
    """Check ``[nabla_X, A] = 0``, invariance of horizontal sections,
    constancy of the trivialized fibers, and transport covariance.

    Global operators are first reduced to their fibers; statement (a) then
    uses the commutator route.
    """
    X = X or RadialVectorField.x0()
    if isinstance(A, OperatorField):
        field = A
        dA = nabla_hat_trivialized(X, field)
    else:
        field, _ = extract_fibers(A)
        dA, _ = nabla_hat_commutator(X, A)
    g = field.grid
    defect_a = dA.max_norm()
    # (b) horizontal angular sections must be mapped to horizontal sections
    th = g.theta
    vecs = np.stack([np.exp(1j * m * th) for m in range(-max_mode, max_mode + 1)])
    img = np.einsum("kij,vj->vki", field.fibers, vecs)
    h = STENCIL_HALF
    K = len(field.rows)
    D = np.zeros((len(vecs), K - 2 * h, g.M), dtype=np.complex128)
    for o, c in zip(range(-h, h + 1), FD1):
        if c:
            D += c * img[:, h + o:K - h + o]
    lam = g.lam[field.rows[h:K - h]]
    D *= (X(lam) / lam / g.ds)[None, :, None]
    w = math.sqrt(g.v_weight / (2 * math.pi))  # unit-norm angular vectors
    defect_b = float(np.max(np.linalg.norm(D, axis=-1)) * w) if D.size else 0.0
    i0 = int(field.rows[0]) if lam0_index is None else int(lam0_index)
    lam0 = float(g.lam[i0])
    F0 = field.restrict([i0]).fibers[0]
    defect_c = float(np.max(np.linalg.norm(field.fibers - F0[None], ord=2, axis=(1, 2))))
    U = parallel_transport_conjugate(field, lam0)
    defect_d = (field - U).max_norm()
    return HorizontalityReport(defect_a, defect_b, defect_c, defect_d, tol)


@dataclass(frozen=True)
class TransportEstimate:
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs * (1 + 1e-6)


def _v_inner(grid: PolarGrid, v: np.ndarray, w: np.ndarray) -> complex:
    return complex(np.vdot(v, w) * grid.v_weight)


def transport_estimate_check(A: OperatorField, X: RadialVectorField, t: float,
                             v: np.ndarray, w: np.ndarray, lam0: float = 1.0,
                             dA: OperatorField | None = None) -> TransportEstimate:
    """Both sides of ``|<(A(lam1) - U* A(lam0) U) v, w>| <= t sup |<nabla_X A U v, U w>|``.

    ``lam1`` is the point reached from ``lam0`` along ``X`` at time ``t``;
    the supremum runs over the grid points between ``lam0`` and ``lam1``.
    """
    g = A.grid
    i0 = g.index_of_lam(lam0)
    i1 = g.index_of_lam(X.flow(lam0, t))
    dA = dA if dA is not None else nabla_hat_trivialized(X, A)
    lo, hi = sorted((i0, i1))
    span = np.arange(lo, hi + 1)
    if not np.all(np.isin(span, dA.rows)):
        raise OffGridError("transport segment leaves the interior rows")
    F1, F0 = A.restrict([i1]).fibers[0], A.restrict([i0]).fibers[0]
    lhs = abs(_v_inner(g, w, (F1 - F0) @ v))
    dF = dA.restrict(span).fibers
    rhs = abs(t) * max(abs(_v_inner(g, w, F @ v)) for F in dF)
    return TransportEstimate(lhs, rhs)


# ---------------------------------------------------------------------------
# the derivative formula for quantized constants of motion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DerivativeFormulaReport:
    """Fiber operator-norm discrepancies on common interior rows."""

    symbol: str
    field: str
    discrepancy_commutator: float
    discrepancy_trivialized: float
    route_gap: float
    scale: float

    @property
    def discrepancy(self) -> float:
        return max(self.discrepancy_commutator, self.discrepancy_trivialized)


def derivative_formula_check(u: PolySymbol, X: RadialVectorField,
                             grid: PolarGrid | None = None,
                             check_preconditions: bool = True) -> DerivativeFormulaReport:
    """Compare ``[nabla_X, Op(u)]`` with ``b(Q^2) Op({h_0, u})``, ``b = a / (2 lam)``.

    For fields outside the proven family pass ``check_preconditions=False``
    and treat the result as data.
    """
    grid = grid or PolarGrid()
    if check_preconditions:
        if not is_constant_of_motion(u, norm_q2(u.n)):
            raise ValueError("symbol is not a constant of motion of ||q||^2")
        if X.is_polynomial:
            nz = [k for k, c in enumerate(X.coeffs) if c]
            if len(nz) != 1 or nz[0] < 1:
                raise ValueError("vector field must be a monomial a = c lam^k with k >= 1")
    O = quantize_diffop(u, grid)
    field, leak = extract_fibers(O)
    lhs_a, _ = nabla_hat_commutator(X, O, leakage=leak)
    lhs_b = nabla_hat_trivialized(X, field)
    rhs_op = quantize_diffop(poisson_connection_apply(RadialVectorField.x0(), u), grid)
    rhs_full, _ = extract_fibers(rhs_op)
    rhs = rhs_full.restrict(lhs_b.rows)
    rhs = rhs.scale_rows(radial_lift(X, grid.n).b(rhs.lam))
    return DerivativeFormulaReport(
        symbol=repr(u),
        field=X.label,
        discrepancy_commutator=(lhs_a - rhs).max_norm(),
        discrepancy_trivialized=(lhs_b - rhs).max_norm(),
        route_gap=(lhs_a - lhs_b).max_norm(),
        scale=rhs.max_norm(),
    )


@dataclass(frozen=True)
class PointwiseWeakReport:
    max_defect: float
    endpoint_defect: float
    times: tuple[float, ...]


_FD_T = FD1


def pointwise_weak_derivative_check(u: PolySymbol, t_max: float = 0.09375,
                                    battery=None, grid: PolarGrid | None = None,
                                    dA: OperatorField | None = None) -> PointwiseWeakReport:
    """Finite-difference ``d/dt <R_t Op(u) R_-t phi, psi>`` versus the formula.

    Times are multiples of ``ds/2`` in ``[0, t_max]``; the derivative uses the
    8th-order stencil with step ``ds/2``.  ``endpoint_defect`` compares the
    formula at ``t = 0`` with the fiberwise action of the derivative field.
    """
    from .battery import narrow_battery

    grid = grid or PolarGrid()
    sections = battery if battery is not None else narrow_battery(grid)
    O = quantize_diffop(u, grid)
    X0 = RadialVectorField.x0()
    if dA is None:
        field, _ = extract_fibers(O)
        dA = nabla_hat_trivialized(X0, field)
    dt = grid.ds / 2
    kmax = int(round(t_max / dt))
    h = STENCIL_HALF
    ks = list(range(-h, kmax + h + 1))
    pairs = [(a, b) for a in sections for b in sections]

    def conj_by(Op, k, phi):
        t = k * dt
        x = flow_transport(-t, phi)
        y = PolarSection(grid, Op(x.values))
        return flow_transport(t, y)

    F = np.array([[direct_integral_inner(conj_by(O.apply, k, a), b) for (a, b) in pairs]
                  for k in ks])
    worst = 0.0
    endpoint = 0.0
    for j in range(kmax + 1):
        deriv = sum(c * F[j + h + o] for o, c in zip(range(-h, h + 1), _FD_T)) / dt
        formula = np.array([direct_integral_inner(conj_by(dA.apply, j, a), b) for (a, b) in pairs])
        worst = max(worst, float(np.max(np.abs(deriv - formula))))
        if j == 0:
            direct = np.array([direct_integral_inner(PolarSection(grid, dA.apply(a.values)), b)
                               for (a, b) in pairs])
            endpoint = float(np.max(np.abs(formula - direct)))
    return PointwiseWeakReport(worst, endpoint, tuple(j * dt for j in range(kmax + 1)))


# ---------------------------------------------------------------------------
# rank-one fields and norm facts
# ---------------------------------------------------------------------------


def rank_one_field(phi: PolarSection, psi: PolarSection) -> OperatorField:
    """Fibers of ``x -> <psi(lam), x> phi(lam)`` (inner product linear in ``x``)."""
    if phi.grid != psi.grid:
        raise GridMismatchError("sections live on different grids")
    g = phi.grid
    F = phi.values[:, :, None] * np.conj(psi.values)[:, None, :] * g.fiber_weight
    return OperatorField(g, F)


def rank_one_derivative_defect(X: RadialVectorField, phi: PolarSection, psi: PolarSection,
                               formula: str = "A") -> float:
    """Max fiber norm of ``D(|phi><psi|) - |D phi><psi| - |phi><D psi|`` (real ``X``)."""
    strict = phi.collar_max() == 0.0 and psi.collar_max() == 0.0
    lhs = nabla_hat_trivialized(X, rank_one_field(phi, psi))
    dphi = connection_apply(X, phi, formula, strict=False)
    dpsi = connection_apply(X, psi, formula, strict=False)
    rhs = rank_one_field(dphi, psi) + rank_one_field(phi, dpsi)
    d = lhs - rhs
    if not strict:
        d = d.restrict(phi.grid.interior(2 * STENCIL_HALF))
    return d.max_norm()


def norm_continuity_modulus(A: OperatorField) -> float:
    """``max_i | ||A(lam_{i+1})|| - ||A(lam_i)|| | / (lam_{i+1} - lam_i)``."""
    n = A.norms()
    lam = A.lam
    if len(n) < 2:
        return 0.0
    return float(np.max(np.abs(np.diff(n)) / np.diff(lam)))


def local_sup_norm(A: OperatorField, C: tuple[float, float]) -> float:
    """``sup_{lam in C} ||A(lam)||`` over the field's grid points."""
    lo, hi = C
    lam = A.lam
    mask = (lam >= lo * (1 - 1e-12)) & (lam <= hi * (1 + 1e-12))
    if not mask.any():
        raise OffGridError(f"no grid point in {C}")
    return float(A.norms()[mask].max())
