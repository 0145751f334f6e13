"""Fixed test batteries: sections, plane functions and multiplier bumps.

Radial profiles are raised-cosine bumps ``cos(pi (s - c) / (2 w))^(2k)`` on
``|s - c| < w``.  They vanish identically on the boundary collar.  The main
battery uses ``k = 2``: products of two sections (fiber inner products,
rank-one fields) then stay resolved by the 8th-order stencil at ``S = 64``
to about 1e-6; real profiles keep the products free of extra oscillation.
:func:`smooth_battery` uses ``k = 4``, whose single derivatives are accurate
to ~3e-7 relative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grids import CartesianGrid, PolarGrid, PolarSection

__all__ = [
    "Bump",
    "SectionSpec",
    "section_specs",
    "section_battery",
    "smooth_battery",
    "narrow_battery",
    "angular_battery",
    "RingFunction",
    "ring_functions",
    "multiplier_bumps",
    "hermite_functions",
]


@dataclass(frozen=True)
class Bump:
    """Radial profile ``g(s) = bump(s) (1 + slope s) exp(i freq s)``."""

    c: float = 0.0
    w: float = 1.65
    k: int = 4
    slope: float = 0.0
    freq: float = 0.0

    def _core(self, s):
        x = (np.asarray(s, dtype=float) - self.c) / self.w
        inside = np.abs(x) < 1
        cs = np.cos(0.5 * np.pi * x)
        sn = np.sin(0.5 * np.pi * x)
        g = np.where(inside, cs ** (2 * self.k), 0.0)
        dg = np.where(inside, -self.k * np.pi / self.w * cs ** (2 * self.k - 1) * sn, 0.0)
        return g, dg

    def __call__(self, s):
        g, _ = self._core(s)
        s = np.asarray(s, dtype=float)
        return g * (1 + self.slope * s) * np.exp(1j * self.freq * s)

    def derivative(self, s):
        """Exact ``dg/ds``."""
        g, dg = self._core(s)
        s = np.asarray(s, dtype=float)
        ph = np.exp(1j * self.freq * s)
        lin = 1 + self.slope * s
        return (dg * lin + g * self.slope + 1j * self.freq * g * lin) * ph


@dataclass(frozen=True)
class SectionSpec:
    """Section ``profile(s) * sum_m modes[m] e^{i m theta}`` (unnormalized)."""

    profile: Bump
    modes: tuple[tuple[int, complex], ...]
    name: str = ""

    def angular(self, theta):
        theta = np.asarray(theta, dtype=float)
        return sum(c * np.exp(1j * m * theta) for m, c in self.modes)

    def angular_norm2(self) -> float:
        """``sum |c_m|^2`` so that the fiber norm squared is ``pi |g|^2`` times this."""
        acc: dict[int, complex] = {}
        for m, c in self.modes:
            acc[m] = acc.get(m, 0) + c
        return float(sum(abs(c) ** 2 for c in acc.values()))

    def values(self, grid: PolarGrid) -> np.ndarray:
        return self.profile(grid.s)[:, None] * self.angular(grid.theta)[None, :]

    def norm(self, grid: PolarGrid) -> float:
        v = self.values(grid)
        return float(np.sqrt(np.sum(np.abs(v) ** 2 * grid.cell_weights)))


_PROFILES = (
    Bump(0.0, 1.6875, 2),
    Bump(0.0375, 1.65, 2),
    Bump(-0.0375, 1.65, 2),
)
_MODES = (0, 1, -1, 2, -2, 3)


def section_specs() -> list[SectionSpec]:
    """The 12 battery specifications (profiles times low angular modes)."""
    specs = []
    for j in range(12):
        m = _MODES[j % 6]
        prof = _PROFILES[j % 3]
        if j < 6:
            modes = ((m, 1.0),)
        else:
            modes = ((m, 1.0), (-(m + 2), 0.5j))
        specs.append(SectionSpec(prof, modes, name=f"b{j:02d}"))
    return specs


def section_battery(grid: PolarGrid) -> list[PolarSection]:
    """Twelve unit-norm sections vanishing on the boundary collar."""
    out = []
    for spec in section_specs():
        v = spec.values(grid)
        out.append(PolarSection(grid, v / spec.norm(grid)))
    return out


def smooth_battery(grid: PolarGrid) -> list[PolarSection]:
    """Unit-norm ``k = 4`` sections for checks of single ``s``-derivatives."""
    out = []
    for j, m in enumerate((0, 1, -2, 3)):
        spec = SectionSpec(Bump(0.05 * (j % 2), 1.6, 4, slope=0.2 * (j // 2)), ((m, 1.0),))
        out.append(PolarSection(grid, spec.values(grid) / spec.norm(grid)))
    return out


def narrow_battery(grid: PolarGrid, width: float = 1.15) -> list[PolarSection]:
    """Unit-norm sections with a wide collar, for tests involving grid shifts."""
    out = []
    for j, m in enumerate((0, 1, -2, 3)):
        spec = SectionSpec(Bump(0.05 * (j - 1.5), width, 4, slope=0.2 * (j % 2)), ((m, 1.0),))
        out.append(PolarSection(grid, spec.values(grid) / spec.norm(grid)))
    return out


def angular_battery(grid: PolarGrid, max_mode: int = 3) -> list[PolarSection]:
    """Sections ``e^{i m theta}`` constant in ``s`` (horizontal at n = 2)."""
    th = grid.theta
    return [PolarSection(grid, np.broadcast_to(np.exp(1j * m * th), grid.shape))
            for m in range(-max_mode, max_mode + 1)]


@dataclass(frozen=True)
class RingFunction:
    """Plane function ``exp(-(r - r0)^2 / (2 sigma^2)) e^{i m theta}``.

    Smooth in Cartesian coordinates and negligible near the polar-grid edges,
    so it is resolved by both grids.
    """

    r0: float = 1.5
    sigma: float = 0.22
    m: int = 0

    def __call__(self, x, y):
        r = np.hypot(x, y)
        th = np.arctan2(y, x)
        return np.exp(-((r - self.r0) ** 2) / (2 * self.sigma ** 2) + 1j * self.m * th)

    def on_cartesian(self, grid: CartesianGrid) -> np.ndarray:
        pts = grid.points()
        return self(pts[:, 0], pts[:, 1])

    def on_polar(self, grid: PolarGrid) -> np.ndarray:
        x, y = grid.cartesian_points()
        return self(x, y)

    def norm2_exact(self) -> float:
        """``int |f|^2 dx`` over the plane (to double precision)."""
        from scipy.integrate import quad

        val, _ = quad(lambda r: r * math.exp(-((r - self.r0) ** 2) / self.sigma ** 2),
                      0.0, self.r0 + 40 * self.sigma, epsabs=0, epsrel=1e-13, limit=200)
        return 2 * math.pi * val


def ring_functions() -> list[RingFunction]:
    return [RingFunction(1.5, 0.22, 0), RingFunction(1.6, 0.22, 1),
            RingFunction(1.45, 0.22, -2), RingFunction(1.55, 0.2, 3)]


def multiplier_bumps(grid: PolarGrid) -> list[np.ndarray]:
    """Five bump functions ``f_k(lam)`` sampled on the log-radial axis."""
    return [np.real(Bump(c, 0.6, 2)(grid.s)) for c in (-1.0, -0.5, 0.0, 0.5, 1.0)]


def hermite_functions(grid: CartesianGrid, count: int = 4, shift: float = 0.0) -> list[np.ndarray]:
    """Normalized Hermite functions on a 1-D grid (or tensor products on 2-D)."""
    from numpy.polynomial.hermite import hermval

    def h1(k, x):
        c = np.zeros(k + 1)
        c[k] = 1.0
        return hermval(x, c) * np.exp(-x * x / 2) / math.sqrt(2 ** k * math.factorial(k) * math.sqrt(math.pi))

    pts = grid.points()
    out = []
    for k in range(count):
        if grid.n == 1:
            v = h1(k, pts[:, 0] - shift)
        else:
            v = h1(k, pts[:, 0] - shift) * h1((k + 1) % count, pts[:, 1])
        out.append(v.astype(np.complex128))
    return out
