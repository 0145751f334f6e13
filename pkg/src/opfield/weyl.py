"""Weyl quantization on grids, by two independent constructions.

* :func:`quantize_kernel` builds the dense matrix of the integral kernel
  ``K(x, y) = (2 pi)^-n int u((x + y)/2, p) e^{i p (x - y)} dp`` on a Cartesian
  grid, with the momentum grid dual to the spatial one.
* :func:`quantize_diffop` builds a differential operator from Weyl-ordered
  terms.  On Cartesian grids the symmetrized products of spectral derivatives
  are used literally.  On the polar grid the symmetrized sum is first reduced
  exactly to the normal form ``sum F_ab(s, theta) d_s^a d_theta^b`` and then
  discretized, averaged with the discrete adjoint of the conjugate symbol so
  that ``Op(u)^* = Op(conj u)`` holds on the grid.
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .battery import hermite_functions, section_battery
from .grids import (
    CartesianGrid,
    CartesianGridFunction,
    GridMismatchError,
    PolarGrid,
    PolarSection,
    d_s,
    d_s2,
    d_theta,
    spectral_derivative,
)
from .phase_space import LinearSymplecticMap, PolySymbol, flow_pullback

__all__ = [
    "GridTooLargeError",
    "SymbolDegreeError",
    "InterpolationWarning",
    "DenseOperator",
    "CartesianDiffOperator",
    "PolarDiffOperator",
    "DilationOperator",
    "standard_ordering",
    "polar_normal_form",
    "quantize_kernel",
    "quantize_diffop",
    "adjoint_identity_check",
    "metaplectic_dilation",
    "covariance_check",
    "q2_commutation_check",
    "cross_backend_check",
    "direct_inner",
]

DEFAULT_MAX_BYTES = 1 << 30


class GridTooLargeError(MemoryError):
    """Raised when a dense kernel would exceed the configured memory cap."""


class SymbolDegreeError(ValueError):
    """Raised when a symbol is of too high degree in ``p`` for the diffop backend."""


class InterpolationWarning(UserWarning):
    """Emitted when a dilation is not a grid shift and is interpolated."""


def direct_inner(grid: PolarGrid, a: np.ndarray, b: np.ndarray) -> complex:
    """Direct-integral inner product of grid values, antilinear in ``a``."""
    return complex(np.sum(np.conj(a) * b * grid.cell_weights))


def _direct_norm(grid: PolarGrid, a: np.ndarray) -> float:
    return math.sqrt(max(direct_inner(grid, a, a).real, 0.0))


def _values(x):
    return x.values if hasattr(x, "values") else np.asarray(x)


# ---------------------------------------------------------------------------
# dense operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DenseOperator:
    """Matrix acting on grid values (Cartesian vector or flattened polar array)."""

    grid: CartesianGrid | PolarGrid
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.complex128)
        size = self._size()
        if m.shape != (size, size):
            raise ValueError(f"matrix shape {m.shape} does not match grid size {size}")
        object.__setattr__(self, "matrix", m)

    def _size(self) -> int:
        if isinstance(self.grid, PolarGrid):
            return self.grid.S * self.grid.M
        return self.grid.size

    def _shape(self) -> tuple[int, ...]:
        return self.grid.shape if isinstance(self.grid, PolarGrid) else (self.grid.size,)

    def apply(self, values):
        v = np.asarray(_values(values), dtype=np.complex128)
        shp = self._shape()
        lead = v.shape[: v.ndim - len(shp)]
        out = v.reshape(-1, self._size()) @ self.matrix.T
        return out.reshape(lead + shp)

    def __call__(self, x):
        out = self.apply(x)
        if isinstance(x, PolarSection):
            return PolarSection(x.grid, out)
        if isinstance(x, CartesianGridFunction):
            return CartesianGridFunction(x.grid, out)
        return out

    def adjoint(self) -> "DenseOperator":
        """Adjoint for the grid inner product (weighted on polar grids)."""
        if isinstance(self.grid, PolarGrid):
            w = np.broadcast_to(self.grid.cell_weights, self.grid.shape).ravel()
            return DenseOperator(self.grid, (self.matrix.conj().T * w[None, :]) / w[:, None])
        return DenseOperator(self.grid, self.matrix.conj().T)

    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    def __matmul__(self, other: "DenseOperator") -> "DenseOperator":
        if self.grid != other.grid:
            raise GridMismatchError("operators on different grids")
        return DenseOperator(self.grid, self.matrix @ other.matrix)

    def __add__(self, other: "DenseOperator") -> "DenseOperator":
        if self.grid != other.grid:
            raise GridMismatchError("operators on different grids")
        return DenseOperator(self.grid, self.matrix + other.matrix)

    def __sub__(self, other: "DenseOperator") -> "DenseOperator":
        if self.grid != other.grid:
            raise GridMismatchError("operators on different grids")
        return DenseOperator(self.grid, self.matrix - other.matrix)

    def __mul__(self, c) -> "DenseOperator":
        return DenseOperator(self.grid, self.matrix * c)

    __rmul__ = __mul__


def _to_dense(op, grid) -> np.ndarray:
    if isinstance(grid, PolarGrid):
        S, M = grid.shape
        size = S * M
        mat = np.empty((size, size), dtype=np.complex128)
        for i in range(S):
            basis = np.zeros((M, S, M), dtype=np.complex128)
            basis[np.arange(M), i, np.arange(M)] = 1.0
            cols = op.apply(basis).reshape(M, size)
            mat[:, i * M:(i + 1) * M] = cols.T
        return mat
    eye = np.eye(grid.size, dtype=np.complex128)
    return op.apply(eye).T.copy()


# ---------------------------------------------------------------------------
# kernel backend
# ---------------------------------------------------------------------------


def _max_bytes(max_bytes: int | None) -> int:
    if max_bytes is not None:
        return int(max_bytes)
    env = os.environ.get("OPFIELD_KERNEL_MAX_BYTES")
    return int(env) if env else DEFAULT_MAX_BYTES


def _eval_symbol(u, q, p) -> np.ndarray:
    val = u(q, p)
    shape = np.broadcast_shapes(np.shape(q)[:-1], np.shape(p)[:-1])
    return np.broadcast_to(np.asarray(val, dtype=np.complex128), shape)


def quantize_kernel(u: Callable, grid: CartesianGrid, max_bytes: int | None = None) -> DenseOperator:
    """Dense Weyl kernel of a callable symbol ``u(q, p)`` on ``grid``.

    Parameters
    ----------
    u : callable
        Symbol evaluated on arrays with trailing axis ``n`` (a
        :class:`~opfield.phase_space.PolySymbol` qualifies).
    grid : CartesianGrid
    max_bytes : int, optional
        Memory cap for the matrix; default ``OPFIELD_KERNEL_MAX_BYTES`` or 1 GiB.

    Returns
    -------
    DenseOperator
        ``K_jk = N^-n sum_m u((x_j + x_k)/2, p_m) exp(i p_m (x_j - x_k))``.
    """
    n, N, dx = grid.n, grid.N, grid.dx
    need = 16 * grid.size ** 2
    if need > _max_bytes(max_bytes):
        raise GridTooLargeError(f"kernel needs {need} bytes, cap is {_max_bytes(max_bytes)}")
    sig = np.arange(2 * N - 1)
    mid = -grid.L + 0.5 * (sig + 1) * dx
    P = grid.momenta
    if n == 1:
        U = _eval_symbol(u, mid[:, None, None], P[None, :, None])
        G = np.fft.ifft(U, axis=1)
        return DenseOperator(grid, _kernels.scatter_kernel_1d(np.ascontiguousarray(G)))
    K4 = np.empty((N, N, N, N), dtype=np.complex128)
    p = np.stack(np.meshgrid(P, P, indexing="ij"), axis=-1)[None]
    for s1 in range(2 * N - 1):
        q = np.stack([np.full(2 * N - 1, mid[s1]), mid], axis=-1)[:, None, None, :]
        U = _eval_symbol(u, q, p)
        Gs = np.ascontiguousarray(np.fft.ifft2(U, axes=(1, 2)))
        _kernels.scatter_kernel_2d(Gs, K4, s1)
    return DenseOperator(grid, K4.reshape(N * N, N * N))


# ---------------------------------------------------------------------------
# Weyl-ordered differential operators on Cartesian grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CartesianDiffOperator:
    """Weyl-symmetrized polynomial differential operator with spectral ``D_j``.

    Each term ``(A, beta)`` is quantized as ``A``, ``(A D + D A)/2`` or the
    four-term symmetrization of ``A D_j D_k``.
    """

    grid: CartesianGrid
    terms: tuple[tuple[np.ndarray, tuple[int, ...]], ...]

    def _D(self, v: np.ndarray, j: int) -> np.ndarray:
        # -i d/dx_j with the kernel's momentum set (Nyquist kept)
        return -1j * spectral_derivative(v, v.ndim - self.grid.n + j, 2 * self.grid.L,
                                         1, keep_nyquist=True)

    def apply(self, values):
        g = self.grid
        v = np.asarray(_values(values), dtype=np.complex128)
        lead = v.shape[:-1]
        v = v.reshape(lead + (g.N,) * g.n)
        out = np.zeros_like(v)
        for A, beta in self.terms:
            A = A.reshape((g.N,) * g.n)
            idx = [j for j, b in enumerate(beta) for _ in range(b)]
            if not idx:
                out += A * v
            elif len(idx) == 1:
                j = idx[0]
                out += 0.5 * (A * self._D(v, j) + self._D(A * v, j))
            else:
                j, k = idx
                out += 0.25 * (A * self._D(self._D(v, k), j)
                               + self._D(A * self._D(v, k), j)
                               + self._D(A * self._D(v, j), k)
                               + self._D(self._D(A * v, k), j))
        return out.reshape(lead + (g.size,))

    def __call__(self, f: CartesianGridFunction) -> CartesianGridFunction:
        return CartesianGridFunction(f.grid, self.apply(f.values))

    def to_dense(self) -> DenseOperator:
        return DenseOperator(self.grid, _to_dense(self, self.grid))


# ---------------------------------------------------------------------------
# exact reduction of Weyl-ordered terms to polar normal form
# ---------------------------------------------------------------------------

# ring element: {(k, a, e): c} meaning c * exp(k s / 2) cos^a(theta) sin^e(theta), e in {0, 1}
Ring = dict[tuple[int, int, int], complex]


def _ring_clean(r: Ring) -> Ring:
    return {k: v for k, v in r.items() if abs(v) > 1e-14}


def _ring_add(x: Ring, y: Ring, c: complex = 1.0) -> Ring:
    out = dict(x)
    for k, v in y.items():
        out[k] = out.get(k, 0) + c * v
    return _ring_clean(out)


def _ring_mul(x: Ring, y: Ring) -> Ring:
    out: Ring = {}
    for (k1, a1, e1), c1 in x.items():
        for (k2, a2, e2), c2 in y.items():
            k, a, e = k1 + k2, a1 + a2, e1 + e2
            c = c1 * c2
            if e == 2:  # sin^2 = 1 - cos^2
                out[(k, a, 0)] = out.get((k, a, 0), 0) + c
                out[(k, a + 2, 0)] = out.get((k, a + 2, 0), 0) - c
            else:
                out[(k, a, e)] = out.get((k, a, e), 0) + c
    return _ring_clean(out)


def _ring_ds(x: Ring) -> Ring:
    return _ring_clean({(k, a, e): c * k / 2 for (k, a, e), c in x.items()})


def _ring_dth(x: Ring) -> Ring:
    out: Ring = {}

    def put(key, c):
        out[key] = out.get(key, 0) + c

    for (k, a, e), c in x.items():
        if e == 0:
            if a:
                put((k, a - 1, 1), -a * c)
        else:
            # d(cos^a sin) = -a cos^(a-1) + (a + 1) cos^(a+1)
            if a:
                put((k, a - 1, 0), -a * c)
            put((k, a + 1, 0), (a + 1) * c)
    return _ring_clean(out)


def _ring_eval(x: Ring, s: np.ndarray, th: np.ndarray) -> np.ndarray:
    S, M = len(s), len(th)
    out = np.zeros((S, M), dtype=np.complex128)
    cos, sin = np.cos(th), np.sin(th)
    for (k, a, e), c in x.items():
        out += c * np.exp(0.5 * k * s)[:, None] * (cos ** a * sin ** e)[None, :]
    return out


# differential operator in normal form: {(i, j): Ring} for sum F_ij d_s^i d_theta^j
PolarForm = dict[tuple[int, int], Ring]


def _deriv_ring(x: Ring, i: int, j: int) -> Ring:
    for _ in range(i):
        x = _ring_ds(x)
    for _ in range(j):
        x = _ring_dth(x)
    return x


def _compose(P: PolarForm, Q: PolarForm) -> PolarForm:
    out: PolarForm = {}
    for (a1, a2), F in P.items():
        for (b1, b2), G in Q.items():
            for g1 in range(a1 + 1):
                for g2 in range(a2 + 1):
                    c = math.comb(a1, g1) * math.comb(a2, g2)
                    dG = _deriv_ring(G, a1 - g1, a2 - g2)
                    if not dG:
                        continue
                    key = (g1 + b1, g2 + b2)
                    out[key] = _ring_add(out.get(key, {}), _ring_mul(F, dG), c)
    return {k: v for k, v in out.items() if v}


def _left_mul(r: Ring, P: PolarForm) -> PolarForm:
    out = {k: _ring_mul(r, v) for k, v in P.items()}
    return {k: v for k, v in out.items() if v}


# Cartesian partials in polar form: d_1 = 2 cos e^{-s/2} d_s - sin e^{-s/2} d_th, etc.
_PARTIAL = {
    0: {(1, 0): {(-1, 1, 0): 2.0}, (0, 1): {(-1, 0, 1): -1.0}},
    1: {(1, 0): {(-1, 0, 1): 2.0}, (0, 1): {(-1, 1, 0): 1.0}},
}


def standard_ordering(u: PolySymbol) -> PolySymbol:
    """Symbol ``b`` with ``Op^Weyl(u) = sum_beta b_beta(q) D^beta`` (D = -i d/dq).

    Uses ``b = exp(-(i/2) sum_j d_qj d_pj) u``, exact on polynomials.
    """
    out = PolySymbol.zero(u.n)
    term = u
    k = 0
    while not term.is_zero():
        out = out + term
        k += 1
        nxt = PolySymbol.zero(u.n)
        for j in range(1, u.n + 1):
            nxt = nxt + term.dq(j).dp(j)
        term = nxt * (-0.5j / k)
    return out


def polar_normal_form(u: PolySymbol) -> PolarForm:
    """Exact normal form ``{(a, b): F_ab}`` of ``Op^Weyl(u)`` for ``n = 2``."""
    if u.n != 2:
        raise ValueError("polar normal form needs n = 2")
    if u.degree_p() > 2:
        raise SymbolDegreeError("diffop backend supports degree <= 2 in p")
    out: PolarForm = {}
    for beta, coef in standard_ordering(u).p_parts().items():
        ring: Ring = {}
        for (alpha, _), c in coef.terms.items():
            mono: Ring = {(0, 0, 0): c}
            for _ in range(alpha[0]):
                mono = _ring_mul(mono, {(1, 1, 0): 1.0})
            for _ in range(alpha[1]):
                mono = _ring_mul(mono, {(1, 0, 1): 1.0})
            ring = _ring_add(ring, mono)
        op: PolarForm = {(0, 0): {(0, 0, 0): (-1j) ** sum(beta)}}
        for j, bj in enumerate(beta):
            for _ in range(bj):
                op = _compose(op, _PARTIAL[j])
        for key, val in _left_mul(ring, op).items():
            merged = _ring_add(out.get(key, {}), val)
            if merged:
                out[key] = merged
            else:
                out.pop(key, None)
    return out


@dataclass(frozen=True, eq=False)
class _Term:
    left: np.ndarray | None
    a: int
    b: int
    right: np.ndarray | None


def _polar_derivative(v: np.ndarray, grid: PolarGrid, a: int, b: int) -> np.ndarray:
    if b:
        v = d_theta(v, b)
    if a == 1:
        v = d_s(v, grid)
    elif a == 2:
        v = d_s2(v, grid)
    elif a:
        raise ValueError("d_s order must be <= 2")
    return v


@dataclass(frozen=True, eq=False)
class PolarDiffOperator:
    """Sum of terms ``left * d_s^a d_theta^b (right * phi)`` on a polar grid.

    ``None`` stands for multiplication by one.  The adjoint is taken with
    respect to the direct-integral inner product, term by term.
    """

    grid: PolarGrid
    terms: tuple[_Term, ...]
    label: str = ""

    @property
    def is_fiberwise(self) -> bool:
        """True when no term differentiates in ``s``."""
        return all(t.a == 0 for t in self.terms)

    def apply(self, values):
        v = np.asarray(_values(values), dtype=np.complex128)
        out = np.zeros_like(v)
        cache: dict[tuple[int, int], np.ndarray] = {}
        for t in self.terms:
            if t.right is None:
                key = (t.a, t.b)
                if key not in cache:
                    cache[key] = _polar_derivative(v, self.grid, t.a, t.b)
                g = cache[key]
            else:
                g = _polar_derivative(t.right * v, self.grid, t.a, t.b)
            out += g if t.left is None else t.left * g
        return out

    def __call__(self, phi: PolarSection) -> PolarSection:
        return PolarSection(phi.grid, self.apply(phi.values))

    def adjoint(self) -> "PolarDiffOperator":
        W = self.grid.cell_weights
        terms = []
        for t in self.terms:
            sign = (-1) ** (t.a + t.b)
            left = sign / W if t.right is None else sign * np.conj(t.right) / W
            right = W if t.left is None else np.conj(t.left) * W
            terms.append(_Term(left, t.a, t.b, right))
        return PolarDiffOperator(self.grid, tuple(terms), self.label + "^*")

    def __add__(self, other: "PolarDiffOperator") -> "PolarDiffOperator":
        if self.grid != other.grid:
            raise GridMismatchError("operators on different grids")
        return PolarDiffOperator(self.grid, self.terms + other.terms)

    def __mul__(self, c) -> "PolarDiffOperator":
        terms = tuple(_Term(c if t.left is None else c * t.left, t.a, t.b, t.right)
                      for t in self.terms)
        return PolarDiffOperator(self.grid, terms, self.label)

    __rmul__ = __mul__

    def __sub__(self, other: "PolarDiffOperator") -> "PolarDiffOperator":
        return self + (-1.0) * other

    def to_dense(self) -> DenseOperator:
        return DenseOperator(self.grid, _to_dense(self, self.grid))

    def simplified(self) -> "PolarDiffOperator":
        """Equivalent operator with radial right factors of pure ``theta`` terms
        folded into the left factor and like terms merged."""
        merged: dict[tuple[int, int], np.ndarray] = {}
        rest = []
        shape = self.grid.shape
        for t in self.terms:
            right = t.right
            if right is not None and t.a == 0 and np.all(right == right[..., :1]):
                right = right[..., :1]
                left = right if t.left is None else t.left * right
                right = None
            else:
                left = t.left
            if right is None:
                L = np.ones(shape, dtype=np.complex128) if left is None else left
                key = (t.a, t.b)
                merged[key] = merged.get(key, 0) + np.broadcast_to(L, shape)
            else:
                rest.append(t)
        terms = [_Term(np.asarray(L, dtype=np.complex128), a, b, None)
                 for (a, b), L in sorted(merged.items())]
        return PolarDiffOperator(self.grid, tuple(terms) + tuple(rest), self.label)

    @classmethod
    def multiplication(cls, grid: PolarGrid, f: np.ndarray, label: str = "") -> "PolarDiffOperator":
        f = np.broadcast_to(np.asarray(f, dtype=np.complex128), grid.shape).copy()
        return cls(grid, (_Term(f, 0, 0, None),), label)

    @classmethod
    def derivative(cls, grid: PolarGrid, a: int, b: int, coeff: complex = 1.0,
                   label: str = "") -> "PolarDiffOperator":
        return cls(grid, (_Term(np.full(grid.shape, coeff, dtype=np.complex128), a, b, None),), label)


def _form_operator(form: PolarForm, grid: PolarGrid, scale: complex) -> PolarDiffOperator:
    terms = []
    for (a, b), ring in sorted(form.items()):
        terms.append(_Term(scale * _ring_eval(ring, grid.s, grid.theta), a, b, None))
    return PolarDiffOperator(grid, tuple(terms))


def quantize_diffop(u: PolySymbol, grid: CartesianGrid | PolarGrid):
    """Weyl quantization as a differential operator.

    Parameters
    ----------
    u : PolySymbol
        Degree at most two in ``p``.
    grid : CartesianGrid or PolarGrid

    Returns
    -------
    CartesianDiffOperator or PolarDiffOperator
    """
    if u.degree_p() > 2:
        raise SymbolDegreeError("diffop backend supports degree <= 2 in p")
    if isinstance(grid, CartesianGrid):
        if u.n != grid.n:
            raise GridMismatchError("symbol and grid dimensions differ")
        pts = grid.points()
        terms = []
        for (alpha, beta), c in sorted(u.terms.items()):
            A = c * np.prod(pts ** np.array(alpha), axis=1).astype(np.complex128)
            terms.append((A, beta))
        return CartesianDiffOperator(grid, tuple(terms))
    if u.n != grid.n:
        raise GridMismatchError("symbol and grid dimensions differ")
    fwd = _form_operator(polar_normal_form(u), grid, 0.5)
    bwd = _form_operator(polar_normal_form(u.conj()), grid, 0.5).adjoint()
    op = (fwd + bwd).simplified()
    return PolarDiffOperator(grid, op.terms, label=repr(u))


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------


def adjoint_identity_check(u: PolySymbol | Callable, backend: str = "kernel",
                           grid: CartesianGrid | PolarGrid | None = None,
                           battery: Sequence[PolarSection] | None = None,
                           conj_symbol: Callable | None = None) -> float:
    """Defect of ``Op(u)^* = Op(conj u)``.

    Kernel backend: operator norm of ``K(u)^H - K(conj u)``.  Diffop backend:
    largest ``|<Op(u) phi, psi> - <phi, Op(conj u) psi>|`` over battery pairs.
    """
    if backend == "kernel":
        grid = grid or CartesianGrid(1, 64, 8.0)
        if conj_symbol is None:
            if isinstance(u, PolySymbol):
                conj_symbol = u.conj()
            else:
                def conj_symbol(q, p, _u=u):
                    return np.conj(_u(q, p))
        K = quantize_kernel(u, grid)
        Kc = quantize_kernel(conj_symbol, grid)
        return float(np.linalg.norm(K.matrix.conj().T - Kc.matrix, 2))
    if backend != "diffop":
        raise ValueError(f"unknown backend {backend!r}")
    grid = grid or PolarGrid()
    sections = battery if battery is not None else section_battery(grid)
    A = quantize_diffop(u, grid)
    B = quantize_diffop(u.conj(), grid)
    vals = np.stack([s.values for s in sections])
    Av, Bv = A.apply(vals), B.apply(vals)
    worst = 0.0
    for i in range(len(sections)):
        for j in range(len(sections)):
            d = direct_inner(grid, Av[i], vals[j]) - direct_inner(grid, vals[i], Bv[j])
            worst = max(worst, abs(d))
    return worst


@dataclass(frozen=True, eq=False)
class DilationOperator:
    """``W_t phi(q) = e^{n t/2} phi(e^t q)`` on the polar grid.

    ``exact`` is False when ``2 t`` is not a multiple of ``ds`` and the shift
    is carried out by cubic interpolation in ``s``.
    """

    grid: PolarGrid
    t: float
    weight_exponent: float = 1.0  # e^{weight_exponent * t}; n/2 = 1 for W

    @property
    def shift(self) -> int | None:
        return self.grid.shift_index(self.t)

    @property
    def exact(self) -> bool:
        return self.shift is not None

    def apply(self, values):
        v = np.asarray(_values(values), dtype=np.complex128)
        g = self.grid
        w = math.exp(self.weight_exponent * self.t)
        k = self.shift
        out = np.zeros_like(v)
        if k is not None:
            if k >= 0:
                out[..., : g.S - k, :] = v[..., k:, :]
            else:
                out[..., -k:, :] = v[..., : g.S + k, :]
            return w * out
        warnings.warn("dilation is not a grid shift; interpolating in s", InterpolationWarning,
                      stacklevel=2)
        u0 = np.arange(g.S) + 2.0 * self.t / g.ds
        U0, U1 = np.meshgrid(u0, np.arange(g.M, dtype=float), indexing="ij")
        flat = v.reshape(-1, g.S, g.M)
        res = np.stack([_kernels.cubic_interp2(b, U0, U1, True) for b in flat])
        return w * res.reshape(v.shape)

    def __call__(self, phi: PolarSection) -> PolarSection:
        return PolarSection(phi.grid, self.apply(phi.values), interpolated=not self.exact)


def _fourier_interp_matrix(x: np.ndarray, y: np.ndarray, dx: float) -> np.ndarray:
    # periodic trigonometric interpolation from grid x to points y (Nyquist split),
    # via the closed-form periodic sinc
    N = len(x)
    u = (y[:, None] - x[None, :]) / dx
    a = np.pi * u / N
    den = N * (np.tan(a) if N % 2 == 0 else np.sin(a))
    near = np.abs(np.sin(a)) < 1e-12
    S = np.sin(np.pi * u) / np.where(near, 1.0, den)
    # removable singularity at u = 0 mod N (limit by l'Hopital)
    lim = np.cos(np.pi * u) * (np.cos(a) ** 2 if N % 2 == 0 else 1 / np.cos(a))
    return np.where(near, lim, S)


def metaplectic_dilation(t: float, grid: CartesianGrid | PolarGrid):
    """Unitary dilation ``W_t phi(q) = e^{n t/2} phi(e^t q)``.

    On the polar grid returns a :class:`DilationOperator` (a pure index shift
    for shift-compatible ``t``).  On a Cartesian grid returns a
    :class:`DenseOperator` built from trigonometric interpolation.
    """
    if isinstance(grid, PolarGrid):
        return DilationOperator(grid, t, grid.n / 2)
    x = grid.x
    E = _fourier_interp_matrix(x, math.exp(t) * x, grid.dx) * math.exp(t / 2)
    if grid.n == 2:
        E = np.kron(E, E)
    return DenseOperator(grid, E.astype(np.complex128))


def covariance_check(u: PolySymbol, t: float, grid: CartesianGrid | PolarGrid | None = None,
                     battery=None) -> float:
    """Defect of ``Op(u o r_t) = W_t Op(u) W_-t`` on a test battery.

    Polar grids use the diffop backend and unit-norm battery sections;
    Cartesian grids use the kernel backend and Hermite functions.
    """
    grid = grid or PolarGrid()
    S = LinearSymplecticMap.dilation(t, u.n)
    v = flow_pullback(u, S)
    if isinstance(grid, PolarGrid):
        sections = battery if battery is not None else section_battery(grid)
        vals = np.stack([s.values for s in sections])
        W, Wm = metaplectic_dilation(t, grid), metaplectic_dilation(-t, grid)
        lhs = quantize_diffop(v, grid).apply(vals)
        rhs = W.apply(quantize_diffop(u, grid).apply(Wm.apply(vals)))
        return max(_direct_norm(grid, d) for d in lhs - rhs)
    funcs = battery if battery is not None else hermite_functions(grid)
    lhs = quantize_kernel(v, grid)
    K = quantize_kernel(u, grid)
    W, Wm = metaplectic_dilation(t, grid), metaplectic_dilation(-t, grid)
    worst = 0.0
    for f in funcs:
        f = np.asarray(f, dtype=np.complex128)
        f = f / (np.linalg.norm(f) * grid.dx ** (grid.n / 2))
        d = lhs.apply(f) - W.apply(K.apply(Wm.apply(f)))
        worst = max(worst, float(np.linalg.norm(d) * grid.dx ** (grid.n / 2)))
    return worst


def q2_commutation_check(u: PolySymbol, t: float, grid: PolarGrid | None = None,
                         battery=None) -> float:
    """Largest ``||[Op(u), e^{i t Q^2}] phi||`` over unit battery sections."""
    grid = grid or PolarGrid()
    sections = battery if battery is not None else section_battery(grid)
    vals = np.stack([s.values for s in sections])
    E = np.exp(1j * t * grid.lam)[:, None]
    A = quantize_diffop(u, grid)
    d = A.apply(E * vals) - E * A.apply(vals)
    return max(_direct_norm(grid, x) for x in d)


def cross_backend_check(u: PolySymbol, grid: CartesianGrid | None = None,
                        polar: PolarGrid | None = None, funcs=None) -> float:
    """Relative discrepancy between the kernel and diffop backends.

    For ``n = 1`` both backends act on the same Cartesian grid and are compared
    on Hermite functions.  For ``n = 2`` the kernel acts on the Cartesian grid
    and its output is resampled spectrally onto the polar grid, where the
    diffop backend acts on the exact samples of smooth ring functions.

    The error is ``||K f - D f|| / max(||D f||, ||f||)``; normalizing by the
    input as well keeps the measure finite when ``Op(u) f`` vanishes.
    """
    if u.n == 1:
        grid = grid or CartesianGrid(1, 64, 8.0)
        fs = funcs if funcs is not None else hermite_functions(grid, 6)
        K, D = quantize_kernel(u, grid), quantize_diffop(u, grid)
        w = grid.dx ** (grid.n / 2)
        worst = 0.0
        for f in fs:
            f = np.asarray(f, dtype=np.complex128)
            a, b = K.apply(f), D.apply(f)
            den = max(np.linalg.norm(b), np.linalg.norm(f)) * w
            worst = max(worst, float(np.linalg.norm(a - b) * w / den))
        return worst
    from .battery import ring_functions
    from .hilbert_field import resample_polar

    grid = grid or CartesianGrid(2, 64, 2.9)
    polar = polar or PolarGrid(n=2)
    rings = funcs if funcs is not None else ring_functions()
    K, D = quantize_kernel(u, grid), quantize_diffop(u, polar)
    worst = 0.0
    for ring in rings:
        kf = resample_polar(CartesianGridFunction(grid, K.apply(ring.on_cartesian(grid))),
                            polar).values
        fp = ring.on_polar(polar)
        df = D.apply(fp)
        den = max(_direct_norm(polar, df), _direct_norm(polar, fp))
        worst = max(worst, _direct_norm(polar, kf - df) / den)
    return worst
