"""Exact polynomial symbols on phase space and their Poisson algebra.

Symbols are sparse polynomials in ``(q, p)`` with complex coefficients.  The
Poisson bracket convention is

    {f, g} = sum_i  df/dp_i dg/dq_i - df/dq_i dg/dp_i,

chosen so that ``{h0, u}`` is the generator of ``t -> u(e^t q, e^-t p)`` with
``h0 = q . p``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

__all__ = [
    "ZERO_TOL",
    "PolySymbol",
    "LinearSymplecticMap",
    "RadialVectorField",
    "RadialLift",
    "PoissonConnectionReport",
    "DimensionMismatchError",
    "NonPolynomialError",
    "NotConstantOfMotionError",
    "poisson_bracket",
    "flow_pullback",
    "flow_generator_defect",
    "is_constant_of_motion",
    "angular_momentum",
    "radial_lift",
    "hamiltonian_lift_symbol",
    "poisson_connection_apply",
    "poisson_connection_identity_check",
    "moment_map_pushforward",
    "norm_q2",
    "euler_symbol",
    "random_symbol",
    "symbol_battery",
]

#: coefficients with modulus at or below this value are dropped
ZERO_TOL = 1e-12

Key = tuple[tuple[int, ...], tuple[int, ...]]


class DimensionMismatchError(ValueError):
    """Raised when symbols of different spatial dimension are combined."""


class NonPolynomialError(ValueError):
    """Raised when a symbolic lift would not be polynomial."""


class NotConstantOfMotionError(ValueError):
    """Raised when an operation requires a constant of motion of ``||q||^2``."""


def _add_idx(a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, ...]:
    return tuple(x + y for x, y in zip(a, b))


class PolySymbol:
    """Sparse polynomial ``sum c_{a,b} q^a p^b`` on ``R^{2n}``.

    Parameters
    ----------
    n : int
        Spatial dimension.
    terms : mapping, optional
        Map ``(alpha, beta) -> coefficient`` with multi-indices of length ``n``.

    Notes
    -----
    Instances are immutable.  Coefficients whose modulus is at most
    :data:`ZERO_TOL` are removed on construction.
    """

    __slots__ = ("n", "_terms")

    def __init__(self, n: int, terms: Mapping[Key, complex] | None = None):
        if n < 1:
            raise ValueError("dimension must be positive")
        clean: dict[Key, complex] = {}
        for (alpha, beta), c in (terms or {}).items():
            alpha, beta = tuple(int(a) for a in alpha), tuple(int(b) for b in beta)
            if len(alpha) != n or len(beta) != n:
                raise DimensionMismatchError("multi-index length differs from n")
            if min(alpha + beta) < 0:
                raise ValueError("negative exponent")
            c = complex(c)
            if abs(c) > ZERO_TOL:
                clean[(alpha, beta)] = clean.get((alpha, beta), 0) + c
        self.n = n
        self._terms = {k: v for k, v in clean.items() if abs(v) > ZERO_TOL}

    # -- constructors -----------------------------------------------------
    @classmethod
    def constant(cls, n: int, c: complex = 1.0) -> "PolySymbol":
        z = (0,) * n
        return cls(n, {(z, z): c})

    @classmethod
    def q(cls, i: int, n: int) -> "PolySymbol":
        """Coordinate function ``q_i`` (1-based index)."""
        return cls(n, {(_unit(i, n), (0,) * n): 1.0})

    @classmethod
    def p(cls, i: int, n: int) -> "PolySymbol":
        """Momentum function ``p_i`` (1-based index)."""
        return cls(n, {((0,) * n, _unit(i, n)): 1.0})

    @classmethod
    def zero(cls, n: int) -> "PolySymbol":
        return cls(n, {})

    # -- accessors ----------------------------------------------------------
    @property
    def terms(self) -> dict[Key, complex]:
        return dict(self._terms)

    def coefficient(self, alpha: Sequence[int], beta: Sequence[int]) -> complex:
        return self._terms.get((tuple(alpha), tuple(beta)), 0j)

    def is_zero(self) -> bool:
        return not self._terms

    def degree(self) -> int:
        return max((sum(a) + sum(b) for a, b in self._terms), default=0)

    def degree_q(self) -> int:
        return max((sum(a) for a, _ in self._terms), default=0)

    def degree_p(self) -> int:
        return max((sum(b) for _, b in self._terms), default=0)

    def max_abs_coeff(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    def is_real(self) -> bool:
        return all(abs(c.imag) <= ZERO_TOL for c in self._terms.values())

    # -- algebra ------------------------------------------------------------
    def _check(self, other: "PolySymbol") -> None:
        if self.n != other.n:
            raise DimensionMismatchError(f"n={self.n} vs n={other.n}")

    def _coerce(self, other) -> "PolySymbol":
        if isinstance(other, PolySymbol):
            self._check(other)
            return other
        if isinstance(other, (int, float, complex, np.number)):
            return PolySymbol.constant(self.n, complex(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for k, v in other._terms.items():
            out[k] = out.get(k, 0) + v
        return PolySymbol(self.n, out)

    __radd__ = __add__

    def __neg__(self) -> "PolySymbol":
        return PolySymbol(self.n, {k: -v for k, v in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return PolySymbol(self.n, {k: complex(other) * v for k, v in self._terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out: dict[Key, complex] = {}
        for (a1, b1), c1 in self._terms.items():
            for (a2, b2), c2 in other._terms.items():
                key = (_add_idx(a1, a2), _add_idx(b1, b2))
                out[key] = out.get(key, 0) + c1 * c2
        return PolySymbol(self.n, out)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "PolySymbol":
        if k < 0:
            raise ValueError("negative power")
        out = PolySymbol.constant(self.n)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def conj(self) -> "PolySymbol":
        """Complex conjugate symbol ``u-bar``."""
        return PolySymbol(self.n, {k: v.conjugate() for k, v in self._terms.items()})

    def dq(self, i: int) -> "PolySymbol":
        """Partial derivative in ``q_i`` (1-based)."""
        return self._diff(i - 1, 0)

    def dp(self, i: int) -> "PolySymbol":
        """Partial derivative in ``p_i`` (1-based)."""
        return self._diff(i - 1, 1)

    def _diff(self, i: int, which: int) -> "PolySymbol":
        if not 0 <= i < self.n:
            raise IndexError("variable index out of range")
        out: dict[Key, complex] = {}
        for (a, b), c in self._terms.items():
            e = (a, b)[which][i]
            if e == 0:
                continue
            idx = list((a, b)[which])
            idx[i] -= 1
            key = (tuple(idx), b) if which == 0 else (a, tuple(idx))
            out[key] = out.get(key, 0) + c * e
        return PolySymbol(self.n, out)

    def equals(self, other: "PolySymbol", tol: float = ZERO_TOL) -> bool:
        """Coefficientwise equality up to ``tol``."""
        return (self - other).max_abs_coeff() <= tol

    def __eq__(self, other) -> bool:
        if not isinstance(other, PolySymbol):
            return NotImplemented
        return self.n == other.n and self.equals(other)

    def __hash__(self) -> int:
        return hash((self.n, tuple(sorted(self._terms))))

    # -- evaluation -----------------------------------------------------------
    def __call__(self, q, p):
        return self.evaluate(q, p)

    def evaluate(self, q, p) -> np.ndarray:
        """Evaluate at points; ``q`` and ``p`` broadcast with trailing axis ``n``."""
        q = np.asarray(q)
        p = np.asarray(p)
        shape = np.broadcast_shapes(q.shape[:-1], p.shape[:-1])
        out = np.zeros(shape, dtype=np.complex128)
        for (a, b), c in self._terms.items():
            mono = c
            for i in range(self.n):
                if a[i]:
                    mono = mono * q[..., i] ** a[i]
                if b[i]:
                    mono = mono * p[..., i] ** b[i]
            out = out + mono
        return out

    def p_parts(self) -> dict[tuple[int, ...], "PolySymbol"]:
        """Split as ``sum_beta c_beta(q) p^beta``; returns ``beta -> c_beta``."""
        parts: dict[tuple[int, ...], dict[Key, complex]] = {}
        z = (0,) * self.n
        for (a, b), c in self._terms.items():
            parts.setdefault(b, {})[(a, z)] = c
        return {b: PolySymbol(self.n, t) for b, t in parts.items()}

    # -- text format --------------------------------------------------------------
    def to_text(self) -> str:
        lines = []
        for (a, b), c in sorted(self._terms.items()):
            lines.append(
                f"alpha=({','.join(map(str, a))}) beta=({','.join(map(str, b))}) "
                f"{c.real!r} {c.imag!r}"
            )
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str, n: int | None = None) -> "PolySymbol":
        pat = re.compile(r"alpha=\(([^)]*)\)\s+beta=\(([^)]*)\)\s+(\S+)\s+(\S+)")
        terms: dict[Key, complex] = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            m = pat.fullmatch(line)
            if m is None:
                raise ValueError(f"line {lineno}: cannot parse {line!r}")
            a = tuple(int(x) for x in m.group(1).split(",") if x.strip())
            b = tuple(int(x) for x in m.group(2).split(",") if x.strip())
            if len(a) != len(b):
                raise ValueError(f"line {lineno}: alpha and beta lengths differ")
            if n is None:
                n = len(a)
            key = (a, b)
            terms[key] = terms.get(key, 0) + complex(float(m.group(3)), float(m.group(4)))
        if n is None:
            raise ValueError("empty symbol file needs an explicit dimension")
        return cls(n, terms)

    def __repr__(self) -> str:
        if not self._terms:
            return f"PolySymbol(n={self.n}, 0)"
        parts = []
        for (a, b), c in sorted(self._terms.items()):
            mono = "".join(
                [f"q{i + 1}^{e}" if e > 1 else f"q{i + 1}" for i, e in enumerate(a) if e]
                + [f"p{i + 1}^{e}" if e > 1 else f"p{i + 1}" for i, e in enumerate(b) if e]
            )
            cs = f"{c.real:g}" if c.imag == 0 else f"({c.real:g}{c.imag:+g}j)"
            parts.append(f"{cs}*{mono}" if mono else cs)
        return f"PolySymbol(n={self.n}, " + " + ".join(parts) + ")"


def _unit(i: int, n: int) -> tuple[int, ...]:
    if not 1 <= i <= n:
        raise IndexError(f"index {i} out of range 1..{n}")
    return tuple(1 if k == i - 1 else 0 for k in range(n))


def norm_q2(n: int) -> PolySymbol:
    """``h(q, p) = ||q||^2``."""
    return sum((PolySymbol.q(i, n) ** 2 for i in range(1, n + 1)), PolySymbol.zero(n))


def euler_symbol(n: int) -> PolySymbol:
    """``h0(q, p) = q . p``."""
    return sum((PolySymbol.q(i, n) * PolySymbol.p(i, n) for i in range(1, n + 1)),
               PolySymbol.zero(n))


# ---------------------------------------------------------------------------
# Poisson bracket and flows
# ---------------------------------------------------------------------------


def poisson_bracket(u: PolySymbol, v: PolySymbol) -> PolySymbol:
    """Exact bracket ``{u, v} = sum_i du/dp_i dv/dq_i - du/dq_i dv/dp_i``."""
    if u.n != v.n:
        raise DimensionMismatchError(f"n={u.n} vs n={v.n}")
    out = PolySymbol.zero(u.n)
    for i in range(1, u.n + 1):
        out = out + u.dp(i) * v.dq(i) - u.dq(i) * v.dp(i)
    return out


class LinearSymplecticMap:
    """Linear map ``z = (q, p) -> S z`` on ``R^{2n}``.

    Parameters
    ----------
    matrix : array_like, shape (2n, 2n)
        Real block matrix.
    check : bool
        Verify ``S^T J S = J`` to 1e-12.
    """

    def __init__(self, matrix, check: bool = True):
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
            raise ValueError("matrix must be square of even size")
        self.matrix = m
        self.n = m.shape[0] // 2
        if check and self.symplectic_defect() > 1e-12:
            raise ValueError("matrix is not symplectic")

    @staticmethod
    def _J(n: int) -> np.ndarray:
        eye, zer = np.eye(n), np.zeros((n, n))
        return np.block([[zer, eye], [-eye, zer]])

    def symplectic_defect(self) -> float:
        J = self._J(self.n)
        return float(np.max(np.abs(self.matrix.T @ J @ self.matrix - J)))

    @classmethod
    def identity(cls, n: int) -> "LinearSymplecticMap":
        return cls(np.eye(2 * n))

    @classmethod
    def dilation(cls, t: float, n: int) -> "LinearSymplecticMap":
        """``(q, p) -> (e^t q, e^-t p)``."""
        return cls(np.diag([math.exp(t)] * n + [math.exp(-t)] * n))

    @classmethod
    def shear(cls, t: float, n: int) -> "LinearSymplecticMap":
        """Flow of ``||q||^2``: ``(q, p) -> (q, p + 2 t q)``."""
        eye, zer = np.eye(n), np.zeros((n, n))
        return cls(np.block([[eye, zer], [2 * t * eye, eye]]))

    @classmethod
    def fourier(cls, n: int) -> "LinearSymplecticMap":
        """``(q, p) -> (-p, q)``."""
        eye, zer = np.eye(n), np.zeros((n, n))
        return cls(np.block([[zer, -eye], [eye, zer]]))

    def __matmul__(self, other: "LinearSymplecticMap") -> "LinearSymplecticMap":
        return LinearSymplecticMap(self.matrix @ other.matrix, check=False)

    def apply(self, q, p) -> tuple[np.ndarray, np.ndarray]:
        z = np.concatenate([np.asarray(q, float), np.asarray(p, float)], axis=-1)
        w = z @ self.matrix.T
        return w[..., : self.n], w[..., self.n:]


def flow_pullback(u: PolySymbol, S: LinearSymplecticMap) -> PolySymbol:
    """Exact composition ``u o S``."""
    if u.n != S.n:
        raise DimensionMismatchError(f"n={u.n} vs n={S.n}")
    n = u.n
    coords = [PolySymbol.q(i, n) for i in range(1, n + 1)] + \
             [PolySymbol.p(i, n) for i in range(1, n + 1)]
    images = []
    for row in S.matrix:
        img = PolySymbol.zero(n)
        for c, z in zip(row, coords):
            if c != 0.0:
                img = img + float(c) * z
        images.append(img)
    powers: dict[tuple[int, int], PolySymbol] = {}

    def power(j: int, e: int) -> PolySymbol:
        if (j, e) not in powers:
            powers[(j, e)] = images[j] ** e
        return powers[(j, e)]

    out = PolySymbol.zero(n)
    for (a, b), c in u.terms.items():
        term = PolySymbol.constant(n, c)
        for j, e in enumerate(a + b):
            if e:
                term = term * power(j, e)
        out = out + term
    return out


def flow_generator_defect(u: PolySymbol, q, p, t: float = 0.0, eps: float = 0.25,
                          levels: int = 5) -> float:
    """Largest ``|d/dt u(r_t(q, p)) - {h0, u}(r_t(q, p))|`` over the given points.

    ``r_t(q, p) = (e^t q, e^-t p)``.  The derivative is a Richardson-extrapolated
    central difference quotient of the exact pullbacks ``u o r_{t +- e}``.
    """
    q = np.atleast_2d(np.asarray(q, dtype=float))
    p = np.atleast_2d(np.asarray(p, dtype=float))
    n = u.n
    table = []
    for k in range(levels):
        e = eps / 2 ** k
        fp = flow_pullback(u, LinearSymplecticMap.dilation(t + e, n))(q, p)
        fm = flow_pullback(u, LinearSymplecticMap.dilation(t - e, n))(q, p)
        row = [(fp - fm) / (2 * e)]
        for j in range(1, k + 1):
            r = 4 ** j
            row.append((r * row[j - 1] - table[k - 1][j - 1]) / (r - 1))
        table.append(row)
    deriv = table[-1][-1]
    qt, pt = LinearSymplecticMap.dilation(t, n).apply(q, p)
    ref = poisson_bracket(euler_symbol(n), u)(qt, pt)
    return float(np.max(np.abs(deriv - ref)))


def is_constant_of_motion(u: PolySymbol, h: PolySymbol) -> bool:
    """True iff ``{h, u}`` is the zero polynomial."""
    return poisson_bracket(h, u).is_zero()


def angular_momentum(i: int, j: int, n: int) -> PolySymbol:
    """``l_ij = q_i p_j - q_j p_i`` for ``1 <= i < j <= n``."""
    if not 1 <= i < j <= n:
        raise IndexError(f"need 1 <= i < j <= n, got ({i}, {j}, {n})")
    Q, P = PolySymbol.q, PolySymbol.p
    return Q(i, n) * P(j, n) - Q(j, n) * P(i, n)


# ---------------------------------------------------------------------------
# radial vector fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RadialVectorField:
    """Vector field ``X = a(lam) d/dlam`` on ``(0, inf)``.

    Either ``coeffs`` (``a = sum coeffs[k] lam^k``, real) or ``func`` is set.
    ``dfunc`` optionally supplies ``a'`` for callables; otherwise a Richardson
    central difference is used.
    """

    coeffs: tuple[float, ...] | None = None
    func: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)
    dfunc: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)
    label: str = ""

    def __post_init__(self):
        if (self.coeffs is None) == (self.func is None):
            raise ValueError("give exactly one of coeffs or func")
        if self.coeffs is not None:
            c = tuple(float(x) for x in self.coeffs)
            while len(c) > 1 and c[-1] == 0.0:
                c = c[:-1]
            object.__setattr__(self, "coeffs", c)

    @classmethod
    def polynomial(cls, coeffs: Sequence[float], label: str = "") -> "RadialVectorField":
        return cls(coeffs=tuple(coeffs), label=label)

    @classmethod
    def monomial(cls, k: int, scale: float = 2.0) -> "RadialVectorField":
        """``a(lam) = scale * lam^k``; ``monomial(1)`` is ``X0``."""
        return cls(coeffs=(0.0,) * k + (scale,), label=f"a={scale:g}*lam^{k}")

    @classmethod
    def x0(cls) -> "RadialVectorField":
        return cls(coeffs=(0.0, 2.0), label="X0")

    @classmethod
    def from_callable(cls, a, da=None, label: str = "") -> "RadialVectorField":
        return cls(func=a, dfunc=da, label=label)

    @property
    def is_polynomial(self) -> bool:
        return self.coeffs is not None

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        if self.coeffs is not None:
            return np.polynomial.polynomial.polyval(lam, self.coeffs)
        return np.asarray(self.func(lam), dtype=float)

    def derivative(self, lam):
        lam = np.asarray(lam, dtype=float)
        if self.coeffs is not None:
            d = np.polynomial.polynomial.polyder(self.coeffs)
            return np.polynomial.polynomial.polyval(lam, d)
        if self.dfunc is not None:
            return np.asarray(self.dfunc(lam), dtype=float)
        h = 1e-3 * np.maximum(1.0, np.abs(lam))
        d1 = (self(lam + h) - self(lam - h)) / (2 * h)
        d2 = (self(lam + 2 * h) - self(lam - 2 * h)) / (4 * h)
        return (4 * d1 - d2) / 3

    def bracket(self, other: "RadialVectorField") -> "RadialVectorField":
        """``[X, Y]`` with coefficient ``a_X a_Y' - a_Y a_X'``."""
        if not (self.is_polynomial and other.is_polynomial):
            raise NonPolynomialError("bracket needs polynomial coefficients")
        P = np.polynomial.polynomial
        c = P.polysub(P.polymul(self.coeffs, P.polyder(other.coeffs)),
                      P.polymul(other.coeffs, P.polyder(self.coeffs)))
        return RadialVectorField(coeffs=tuple(np.atleast_1d(c)),
                                 label=f"[{self.label},{other.label}]")

    def lift_coeffs(self) -> tuple[float, ...]:
        """Coefficients of ``b(lam) = a(lam) / (2 lam)``; needs ``a(0) = 0``."""
        if not self.is_polynomial:
            raise NonPolynomialError("callable coefficient has no symbolic lift")
        if abs(self.coeffs[0]) > ZERO_TOL:
            raise NonPolynomialError("a(0) != 0, so a(lam)/(2 lam) is not polynomial")
        if len(self.coeffs) == 1:
            return (0.0,)
        return tuple(c / 2.0 for c in self.coeffs[1:])

    def flow(self, lam0: float, t: float) -> float:
        """Integral curve ``lam(t)`` of ``X`` with ``lam(0) = lam0``."""
        c = self.coeffs
        if c is not None:
            nz = [k for k, v in enumerate(c) if v != 0.0]
            if not nz:
                return float(lam0)
            if len(nz) == 1:
                k, s = nz[0], c[nz[0]]
                if k == 0:
                    return float(lam0 + s * t)
                if k == 1:
                    return float(lam0 * math.exp(s * t))
                base = lam0 ** (1 - k) - (k - 1) * s * t
                if base <= 0:
                    raise ValueError("integral curve leaves (0, inf) before time t")
                return float(base ** (1.0 / (1 - k)))
        from scipy.integrate import solve_ivp

        sol = solve_ivp(lambda _, y: self(y), (0.0, t), [lam0], rtol=1e-12, atol=1e-14)
        return float(sol.y[0, -1])


@dataclass(frozen=True)
class RadialLift:
    """Normal lift ``X~(q) = b(||q||^2) sum_j q_j d/dq_j`` of a radial field."""

    X: RadialVectorField
    n: int

    def b(self, lam):
        lam = np.asarray(lam, dtype=float)
        return self.X(lam) / (2.0 * lam)

    def db(self, lam):
        lam = np.asarray(lam, dtype=float)
        return self.X.derivative(lam) / (2.0 * lam) - self.X(lam) / (2.0 * lam * lam)

    def divergence(self, lam):
        """``div X~ = n b + 2 lam b'`` as a function of ``lam = ||q||^2``."""
        lam = np.asarray(lam, dtype=float)
        return self.n * self.b(lam) + 2.0 * lam * self.db(lam)

    def b_symbol(self) -> PolySymbol:
        """``b(||q||^2)`` as a polynomial symbol."""
        h = norm_q2(self.n)
        out = PolySymbol.zero(self.n)
        for k, c in enumerate(self.X.lift_coeffs()):
            if c != 0.0:
                out = out + c * h ** k
        return out

    def apply(self, u: PolySymbol) -> PolySymbol:
        """``X~(u)`` for a symbol, acting on the ``q`` variables."""
        if u.n != self.n:
            raise DimensionMismatchError(f"n={u.n} vs n={self.n}")
        e = PolySymbol.zero(self.n)
        for j in range(1, self.n + 1):
            e = e + PolySymbol.q(j, self.n) * u.dq(j)
        return self.b_symbol() * e

    def divergence_symbol(self) -> PolySymbol:
        b = self.b_symbol()
        return self.n * b + self.apply(b)


def radial_lift(X: RadialVectorField, n: int) -> RadialLift:
    """Normal lift of ``X`` to ``R^n`` minus the origin."""
    if n < 1:
        raise ValueError("dimension must be positive")
    return RadialLift(X, n)


def hamiltonian_lift_symbol(X: RadialVectorField, n: int) -> PolySymbol:
    """``h_X~(q, p) = b(||q||^2) (q . p)``."""
    return radial_lift(X, n).b_symbol() * euler_symbol(n)


def poisson_connection_apply(X: RadialVectorField, u: PolySymbol) -> PolySymbol:
    """``{h_X~, u}`` for a constant of motion ``u`` of ``||q||^2``."""
    if not is_constant_of_motion(u, norm_q2(u.n)):
        raise NotConstantOfMotionError("symbol does not Poisson-commute with ||q||^2")
    return poisson_bracket(hamiltonian_lift_symbol(X, u.n), u)


@dataclass(frozen=True)
class PoissonConnectionReport:
    """Coefficient defects of the two Poisson-connection identities."""

    defect_a: float
    defect_b: float
    tol: float = ZERO_TOL

    @property
    def holds_a(self) -> bool:
        return self.defect_a <= self.tol

    @property
    def holds_b(self) -> bool:
        return self.defect_b <= self.tol


def poisson_connection_identity_check(X: RadialVectorField, Y: RadialVectorField,
                                      u: PolySymbol, v: PolySymbol) -> PoissonConnectionReport:
    """Evaluate the derivation identity (a) and the curvature identity (b).

    (a) ``D_X {u, v} = {D_X u, v} + {u, D_X v}``
    (b) ``D_X D_Y u - D_Y D_X u = D_[X,Y] u``
    """
    D = poisson_connection_apply
    lhs_a = D(X, poisson_bracket(u, v))
    rhs_a = poisson_bracket(D(X, u), v) + poisson_bracket(u, D(X, v))
    lhs_b = D(X, D(Y, u)) - D(Y, D(X, u))
    rhs_b = D(X.bracket(Y), u)
    return PoissonConnectionReport((lhs_a - rhs_a).max_abs_coeff(),
                                   (lhs_b - rhs_b).max_abs_coeff())


def moment_map_pushforward(a: PolySymbol, components: Sequence[PolySymbol]) -> PolySymbol:
    """Substitute ``components`` for the variables of ``a``.

    ``a`` is a polynomial in ``k = a.n`` variables written in the ``q`` slots
    (no momentum dependence).
    """
    if a.n != len(components):
        raise DimensionMismatchError(f"a has {a.n} variables, got {len(components)} components")
    if a.degree_p():
        raise ValueError("a must depend on its q slots only")
    if not components:
        raise ValueError("need at least one component")
    n = components[0].n
    for c in components:
        if c.n != n:
            raise DimensionMismatchError("components of different dimension")
    out = PolySymbol.zero(n)
    for (alpha, _), c in a.terms.items():
        term = PolySymbol.constant(n, c)
        for comp, e in zip(components, alpha):
            if e:
                term = term * comp ** e
        out = out + term
    return out


# ---------------------------------------------------------------------------
# helpers for batteries and random testing
# ---------------------------------------------------------------------------


def random_symbol(rng: np.random.Generator, n: int, max_degree: int = 4,
                  n_terms: int = 4, coeff_range: int = 3) -> PolySymbol:
    """Random polynomial with small integer coefficients (exact in binary)."""
    terms: dict[Key, complex] = {}
    for _ in range(n_terms):
        deg = int(rng.integers(0, max_degree + 1))
        cuts = np.sort(rng.integers(0, deg + 1, size=2 * n - 1))
        parts = np.diff(np.concatenate([[0], cuts, [deg]]))
        key = (tuple(int(x) for x in parts[:n]), tuple(int(x) for x in parts[n:]))
        c = 0
        while c == 0:
            c = int(rng.integers(-coeff_range, coeff_range + 1))
        terms[key] = terms.get(key, 0) + c
    return PolySymbol(n, terms)


def symbol_battery() -> dict[str, PolySymbol]:
    """The six constants of motion of ``||q||^2`` (n = 2) used throughout."""
    h = norm_q2(2)
    l12 = angular_momentum(1, 2, 2)
    return {
        "q2": h,
        "q4": h * h,
        "q2_l12": h * l12,
        "l12": l12,
        "l12_sq": l12 * l12,
        "one_plus_l12_sq_q2": (1 + l12 * l12) * h,
    }

