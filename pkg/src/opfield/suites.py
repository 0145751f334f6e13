"""Named verification suites.

Each suite is a list of checks.  A check returns one or more
:class:`Outcome` objects carrying a metric and, for thresholded checks, the
tolerance it is compared against.  Lower bounds are encoded as
``metric = threshold - value`` with tolerance 0, so every thresholded check
passes iff ``metric <= tol``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from . import battery as bat
from .grids import CartesianGrid, PolarGrid, PolarSection, spectral_derivative
from .hilbert_field import (
    connection_apply,
    direct_integral_inner,
    direct_integral_norm,
    dilation_group,
    fiber_norms,
    flow_transport,
    fourier_conjugate,
    horizontal_test,
    hx_symmetry_defect,
    leibniz_defect,
    resample_cartesian,
    trivialize,
    untrivialize,
)
from .op_field import (
    LEAKAGE_TOL,
    OperatorField,
    decomposability_defect,
    derivative_formula_check,
    extract_fibers,
    horizontality_report,
    nabla_hat_commutator,
    nabla_hat_trivialized,
    norm_continuity_modulus,
    pointwise_weak_derivative_check,
    rank_one_derivative_defect,
    rank_one_field,
    transport_estimate_check,
)
from .phase_space import (
    PolySymbol,
    RadialVectorField,
    angular_momentum,
    flow_generator_defect,
    hamiltonian_lift_symbol,
    moment_map_pushforward,
    norm_q2,
    poisson_bracket,
    poisson_connection_apply,
    poisson_connection_identity_check,
    random_symbol,
    symbol_battery,
)
from .weyl import (
    PolarDiffOperator,
    adjoint_identity_check,
    covariance_check,
    cross_backend_check,
    q2_commutation_check,
    quantize_diffop,
    quantize_kernel,
)

__all__ = ["Outcome", "Context", "SUITES", "suite_names", "run_checks", "SYMBOLIC_TOL", "LOWER_BOUND"]

#: coefficient tolerance for exact symbolic identities
SYMBOLIC_TOL = 1e-12
#: unitarity and fiber-norm tolerance
UNITARY_TOL = 1e-10
#: kernel-backend adjoint tolerance
KERNEL_ADJOINT_TOL = 1e-10
#: decomposability tolerance for battery operators
DECOMP_TOL = 1e-12
#: finite-difference-in-t tolerance for the pointwise-to-weak check
POINTWISE_TOL = 1e-5
#: minimum defect expected from non-decomposable or non-horizontal controls
LOWER_BOUND = 0.05


@dataclass(frozen=True)
class Outcome:
    check: str
    anchor: str
    metric: float
    tol: float | None  # None marks an info record


def _lower(check: str, anchor: str, value: float) -> Outcome:
    return Outcome(check, anchor, LOWER_BOUND - value, 0.0)


class Context:
    """Grids, batteries and quantized operators shared by the checks of one run."""

    def __init__(self, config):
        self.cfg = config
        self.grid = PolarGrid(S=config.S, M=config.M, s_min=config.s_min,
                              s_max=config.s_max, n=config.n)
        self.cgrid1 = CartesianGrid(1, config.N, config.L)
        self.cgrid2 = CartesianGrid(2, config.N, config.cart_L2)
        self.rng = np.random.default_rng(config.seed)
        self.symbols = symbol_battery()
        self.X0 = RadialVectorField.x0()
        self.X2 = RadialVectorField.monomial(2)
        self._ops: dict[str, PolarDiffOperator] = {}
        self._fields: dict[str, tuple[OperatorField, float]] = {}
        self._battery = None

    @property
    def battery(self) -> list[PolarSection]:
        if self._battery is None:
            self._battery = bat.section_battery(self.grid)
        return self._battery

    def op(self, name: str) -> PolarDiffOperator:
        if name not in self._ops:
            self._ops[name] = quantize_diffop(self.symbols[name], self.grid)
        return self._ops[name]

    def fibers(self, name: str) -> tuple[OperatorField, float]:
        if name not in self._fields:
            self._fields[name] = extract_fibers(self.op(name))
        return self._fields[name]


# ---------------------------------------------------------------------------
# poisson
# ---------------------------------------------------------------------------


def _triples(ctx: Context, count: int = 50):
    rng = np.random.default_rng(ctx.cfg.seed)
    out = []
    for k in range(count):
        n = 1 + k % 3
        out.append(tuple(random_symbol(rng, n, 4) for _ in range(3)))
    return out


def _poisson_algebra(ctx: Context) -> Iterator[Outcome]:
    anti = lin = leib = jac = 0.0
    PB = poisson_bracket
    for u, v, w in _triples(ctx):
        anti = max(anti, (PB(u, v) + PB(v, u)).max_abs_coeff())
        lin = max(lin, (PB(u, 2 * v - 3 * w) - 2 * PB(u, v) + 3 * PB(u, w)).max_abs_coeff())
        leib = max(leib, (PB(u, v * w) - PB(u, v) * w - v * PB(u, w)).max_abs_coeff())
        jac = max(jac, (PB(u, PB(v, w)) + PB(v, PB(w, u)) + PB(w, PB(u, v))).max_abs_coeff())
    yield Outcome("bracket-antisymmetry", "Poisson bracket: antisymmetry", anti, SYMBOLIC_TOL)
    yield Outcome("bracket-bilinearity", "Poisson bracket: bilinearity", lin, SYMBOLIC_TOL)
    yield Outcome("bracket-leibniz", "Poisson bracket: Leibniz rule", leib, SYMBOLIC_TOL)
    yield Outcome("bracket-jacobi", "Poisson bracket: Jacobi identity", jac, SYMBOLIC_TOL)


def _flow_generator(ctx: Context) -> Iterator[Outcome]:
    rng = np.random.default_rng(ctx.cfg.seed + 1)
    worst = 0.0
    for k in range(6):
        n = 1 + k % 3
        u = random_symbol(rng, n, 4)
        q = rng.uniform(-1, 1, (20, n))
        p = rng.uniform(-1, 1, (20, n))
        for t in (0.0, 0.3, -0.3, 1.0, -1.0):
            worst = max(worst, flow_generator_defect(u, q, p, t))
    yield Outcome("flow-generator", "dilation flow generated by the bracket with q.p",
                  worst, ctx.cfg.tol_exact)


def _monomials():
    return [RadialVectorField.monomial(k) for k in (1, 2, 3)]


def _constants_of_motion(ctx: Context) -> Iterator[Outcome]:
    h = norm_q2(2)
    syms = list(ctx.symbols.values())
    closure = 0.0
    for u in syms:
        for v in syms:
            closure = max(closure, poisson_bracket(h, poisson_bracket(u, v)).max_abs_coeff())
        for X in _monomials():
            closure = max(closure, poisson_bracket(h, poisson_connection_apply(X, u)).max_abs_coeff())
    yield Outcome("com-closure", "constants of motion closed under bracket and connection",
                  closure, SYMBOLIC_TOL)
    rng = np.random.default_rng(ctx.cfg.seed + 2)
    worst = 0.0
    cases = [(2, [angular_momentum(1, 2, 2)]),
             (3, [angular_momentum(1, 2, 3), angular_momentum(1, 3, 3), angular_momentum(2, 3, 3)])]
    for n, comps in cases:
        for _ in range(3):
            a = random_symbol(rng, len(comps), 3)
            a = PolySymbol(a.n, {(al, (0,) * a.n): c for (al, _), c in a.terms.items()})
            pushed = moment_map_pushforward(a, comps)
            hs = [norm_q2(n)] + [hamiltonian_lift_symbol(X, n) for X in _monomials()]
            for hh in hs:
                worst = max(worst, poisson_bracket(hh, pushed).max_abs_coeff())
    yield Outcome("moment-map-invariance", "angular-momentum functions commute with h and lifts",
                  worst, SYMBOLIC_TOL)


def _poisson_connection(ctx: Context) -> Iterator[Outcome]:
    syms = list(ctx.symbols.values())
    Xs = _monomials()
    da = db = 0.0
    for X in Xs:
        for Y in Xs:
            for i, u in enumerate(syms):
                v = syms[(i + 1) % len(syms)]
                r = poisson_connection_identity_check(X, Y, u, v)
                da, db = max(da, r.defect_a), max(db, r.defect_b)
    yield Outcome("poisson-connection-derivation", "Poisson connection is a bracket derivation",
                  da, SYMBOLIC_TOL)
    yield Outcome("poisson-connection-curvature", "Poisson connection curvature identity",
                  db, SYMBOLIC_TOL)


# ---------------------------------------------------------------------------
# weyl
# ---------------------------------------------------------------------------


def _n1_symbols():
    q, p = PolySymbol.q(1, 1), PolySymbol.p(1, 1)
    return {"q2": q * q, "p2": p * p, "qp": q * p}


def _kernel_basics(ctx: Context) -> Iterator[Outcome]:
    g = ctx.cgrid1
    K1 = quantize_kernel(PolySymbol.constant(1), g)
    yield Outcome("kernel-identity", "quantization of the constant symbol",
                  float(np.max(np.abs(K1.matrix - np.eye(g.size)))), SYMBOLIC_TOL)
    q, p = PolySymbol.q(1, 1), PolySymbol.p(1, 1)
    worst = 0.0
    for u in list(_n1_symbols().values()) + [q * q * p * p + q ** 4, 0.5 * p ** 3 - q ** 3 * p]:
        K = quantize_kernel(u, g).matrix
        worst = max(worst, float(np.linalg.norm(K - K.conj().T, 2)))
    yield Outcome("kernel-hermitian", "real symbols give Hermitian kernels", worst, KERNEL_ADJOINT_TOL)


def _linearity(ctx: Context) -> Iterator[Outcome]:
    s = _n1_symbols()
    g = ctx.cgrid1
    u, v = s["q2"], s["qp"]
    a, b = 2.0 - 1.0j, 0.5
    K = quantize_kernel(a * u + b * v, g).matrix
    Kl = a * quantize_kernel(u, g).matrix + b * quantize_kernel(v, g).matrix
    lin_k = float(np.linalg.norm(K - Kl, 2) / np.linalg.norm(K, 2))
    yield Outcome("linearity-kernel", "kernel quantizer is linear", lin_k, ctx.cfg.tol_exact)
    u, v = ctx.symbols["q2_l12"], ctx.symbols["l12_sq"]
    vals = np.stack([x.values for x in ctx.battery])
    lhs = quantize_diffop(a * u + b * v, ctx.grid).apply(vals)
    rhs = a * ctx.op("q2_l12").apply(vals) + b * ctx.op("l12_sq").apply(vals)
    lin_d = max(direct_integral_norm(PolarSection(ctx.grid, d)) for d in lhs - rhs)
    yield Outcome("linearity-diffop", "differential quantizer is linear", lin_d, ctx.cfg.tol_exact)


def _cross_backend(ctx: Context) -> Iterator[Outcome]:
    for name, u in _n1_symbols().items():
        err = cross_backend_check(u, ctx.cgrid1)
        yield Outcome(f"cross-backend-n1-{name}", "kernel and differential quantizers agree",
                      err, ctx.cfg.tol_cross)
    for name in ("q2", "l12", "q2_l12", "l12_sq"):
        err = cross_backend_check(ctx.symbols[name], ctx.cgrid2, ctx.grid)
        yield Outcome(f"cross-backend-n2-{name}",
                      "kernel and differential quantizers agree after resampling",
                      err, ctx.cfg.tol_cross)


def _adjoint(ctx: Context) -> Iterator[Outcome]:
    q, p = PolySymbol.q(1, 1), PolySymbol.p(1, 1)
    worst = 0.0
    for u in (q * q + 1j * p, q * p + 1j * q * q, (1 + 2j) * p * p - 1j * q ** 3 * p):
        worst = max(worst, adjoint_identity_check(u, "kernel", ctx.cgrid1))
    yield Outcome("adjoint-kernel", "adjoint of a quantization is the quantized conjugate",
                  worst, KERNEL_ADJOINT_TOL)
    s = ctx.symbols
    q1, q2_, p1, p2 = PolySymbol.q(1, 2), PolySymbol.q(2, 2), PolySymbol.p(1, 2), PolySymbol.p(2, 2)
    worst = 0.0
    for u in (s["q2"] + 1j * s["l12"], s["l12"] + 1j * s["q2_l12"], (1 + 1j) * s["l12_sq"],
              q1 * p2 + 1j * q2_ * q2_ * p1):
        worst = max(worst, adjoint_identity_check(u, "diffop", ctx.grid, ctx.battery))
    yield Outcome("adjoint-diffop", "adjoint identity for the differential quantizer on the battery",
                  worst, ctx.cfg.tol_exact)


def _covariance(ctx: Context) -> Iterator[Outcome]:
    ds = ctx.grid.ds
    worst = 0.0
    for name in ("q2", "q2_l12", "l12_sq"):
        for t in (ds / 2, -ds, 1.5 * ds):
            worst = max(worst, covariance_check(ctx.symbols[name], t, ctx.grid, ctx.battery))
    yield Outcome("covariance-diffop", "dilation covariance of the differential quantizer",
                  worst, ctx.cfg.tol_exact)
    worst = 0.0
    for u in _n1_symbols().values():
        worst = max(worst, covariance_check(u, 0.1, ctx.cgrid1))
    yield Outcome("covariance-cartesian", "dilation covariance of the kernel quantizer",
                  worst, ctx.cfg.tol_cross)
    u = _n1_symbols()["qp"]
    L = ctx.cgrid1.L
    d = [covariance_check(u, 0.1, CartesianGrid(1, N, L)) for N in (32, 48, 64)]
    ratio = max(d[1] / max(d[0], 1e-300), d[2] / max(d[1], 1e-300))
    yield Outcome("covariance-refinement", "covariance defect does not grow under refinement "
                  "(largest ratio, at most 2)", ratio, 2.0)


def _q2_commutation(ctx: Context) -> Iterator[Outcome]:
    worst = 0.0
    for u in ctx.symbols.values():
        worst = max(worst, q2_commutation_check(u, 0.7, ctx.grid, ctx.battery))
    yield Outcome("q2-commutation", "constants of motion commute with functions of Q^2",
                  worst, ctx.cfg.tol_exact)


# ---------------------------------------------------------------------------
# field
# ---------------------------------------------------------------------------


def _trivialization(ctx: Context) -> Iterator[Outcome]:
    unit = rt = 0.0
    for phi in ctx.battery:
        T = trivialize(phi)
        unit = max(unit, float(np.max(np.abs(T.fiber_norms() - fiber_norms(phi)))))
        rt = max(rt, float(np.max(np.abs(untrivialize(T).values - phi.values))))
    yield Outcome("trivialization-unitarity", "trivialization is fiberwise unitary", unit, UNITARY_TOL)
    yield Outcome("trivialization-inverse", "untrivialize inverts trivialize", rt, ctx.cfg.tol_exact)


def _parseval(ctx: Context) -> Iterator[Outcome]:
    g = ctx.grid
    worst = 0.0
    for ring in bat.ring_functions():
        phi = PolarSection(g, ring.on_polar(g))
        exact = ring.norm2_exact()
        worst = max(worst, abs(direct_integral_norm(phi) ** 2 - exact) / exact)
    yield Outcome("parseval-rings", "direct-integral norm equals the plane L2 norm",
                  worst, ctx.cfg.tol_exact)
    cg = ctx.cgrid2
    secs = ctx.battery[:6]
    cart = [resample_cartesian(s, cg) for s in secs]
    worst = 0.0
    for i, a in enumerate(secs):
        for j, b in enumerate(secs):
            di = direct_integral_inner(a, b)
            ci = cart[i].inner(cart[j])
            worst = max(worst, abs(di - ci) / (direct_integral_norm(a) * direct_integral_norm(b)))
    yield Outcome("parseval-cartesian", "direct-integral and Cartesian inner products agree",
                  worst, ctx.cfg.tol_cross)


def _connection(ctx: Context) -> Iterator[Outcome]:
    worst = 0.0
    for X in (ctx.X0, ctx.X2):
        for phi in ctx.battery:
            a = connection_apply(X, phi, "A").values
            b = connection_apply(X, phi, "B").values
            worst = max(worst, float(np.max(np.abs(a - b))))
    yield Outcome("connection-formulas", "two formulas for the connection agree", worst, UNITARY_TOL)
    secs = ctx.battery
    for X, info in ((ctx.X0, False), (ctx.X2, True)):
        d = max(leibniz_defect(X, a, b) for a in secs for b in secs)
        tol = None if info else ctx.cfg.tol_stencil
        yield Outcome(f"connection-leibniz-{X.label}", "metric compatibility of the connection",
                      d, tol)


def _trivialized_derivative(ctx: Context) -> Iterator[Outcome]:
    g = ctx.grid
    worst = 0.0
    for j, m in enumerate((0, 1, -2, 3)):
        prof = bat.Bump(0.05 * (j % 2), 1.6, 4, slope=0.2 * (j // 2))
        spec = bat.SectionSpec(prof, ((m, 1.0),))
        nrm = spec.norm(g)
        phi = PolarSection(g, spec.values(g) / nrm)
        ang = spec.angular(g.theta)[None, :] / nrm
        for X in (ctx.X0, ctx.X2):
            lhs = trivialize(connection_apply(X, phi)).values
            # X acting on T phi: (a / lam) d/ds of the trivialized values, exact profile derivative
            Tphi_ds = trivialize(PolarSection(g, prof.derivative(g.s)[:, None] * ang)).values
            rhs = (X(g.lam) / g.lam)[:, None] * Tphi_ds
            scale = float(np.max(np.abs(rhs))) or 1.0
            worst = max(worst, float(np.max(np.abs(lhs - rhs))) / scale)
    yield Outcome("trivialization-derivative", "trivialization intertwines connection and d/dlam "
                  "(relative)", worst, ctx.cfg.tol_stencil)


def _flow_derivative(ctx: Context) -> Iterator[Outcome]:
    g = ctx.grid
    secs = bat.smooth_battery(g)
    dt = g.ds / 2
    worst = 0.0
    steps = np.arange(1, 5) * dt
    for phi in secs:
        # Neville extrapolation to t -> 0 of central quotients, polynomial in t^2
        P = [(flow_transport(t, phi).values - flow_transport(-t, phi).values) / (2 * t)
             for t in steps]
        h2 = steps ** 2
        for lev in range(1, len(P)):
            P = [(h2[i + lev] * P[i] - h2[i] * P[i + 1]) / (h2[i + lev] - h2[i])
                 for i in range(len(P) - 1)]
        extrap = P[0]
        d = connection_apply(ctx.X0, phi).values
        worst = max(worst, float(np.max(np.abs(extrap - d))))
    yield Outcome("flow-derivative", "transport flow is generated by the connection along X0",
                  worst, ctx.cfg.tol_stencil)


def _dilations(ctx: Context) -> Iterator[Outcome]:
    g = ctx.grid
    ds = g.ds
    law = unit = 0.0
    for phi in ctx.battery:
        for t, u in ((ds / 2, ds), (-ds, 1.5 * ds), (ds, -ds / 2)):
            a = dilation_group(t, dilation_group(u, phi)).values
            b = dilation_group(t + u, phi).values
            law = max(law, float(np.max(np.abs(a - b))))
        for t in (ds / 2, -2 * ds, 3 * ds):
            unit = max(unit, abs(direct_integral_norm(dilation_group(t, phi)) - 1.0))
    yield Outcome("dilation-group-law", "dilations form a one-parameter group", law, ctx.cfg.tol_exact)
    yield Outcome("dilation-unitarity", "dilations preserve the direct-integral norm", unit, UNITARY_TOL)


def _hx(ctx: Context) -> Iterator[Outcome]:
    secs = ctx.battery
    for X in (ctx.X0, ctx.X2):
        d = max(hx_symmetry_defect(X, a, b) for a in secs for b in secs)
        yield Outcome(f"hx-symmetry-{X.label}", "symmetry of the connection Hamiltonian",
                      d, ctx.cfg.tol_stencil)


def _horizontal_sections(ctx: Context) -> Iterator[Outcome]:
    g = ctx.grid
    d = max(horizontal_test(phi).defect for phi in bat.angular_battery(g))
    yield Outcome("horizontal-angular", "angular sections are horizontal", d, ctx.cfg.tol_exact)
    d = min(horizontal_test(phi).defect for phi in ctx.battery)
    yield _lower("horizontal-control", "compactly supported sections are not horizontal", d)


def _laplacian(ctx: Context) -> Iterator[Outcome]:
    worst = 0.0
    for n, N, L in ((1, ctx.cfg.N, ctx.cfg.L), (2, min(ctx.cfg.N, 40), ctx.cfg.L)):
        cg = CartesianGrid(n, N, L)
        O = fourier_conjugate(quantize_kernel(norm_q2(n), cg), cg)
        dual = cg.dual()
        funcs = bat.hermite_functions(dual, 4)
        for f in funcs:
            lhs = O.apply(f)
            vals = f.reshape((N,) * n)
            lap = sum(spectral_derivative(vals, ax, 2 * dual.L, 2, True) for ax in range(n))
            rhs = -lap.reshape(-1)
            worst = max(worst, float(np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs)))
    yield Outcome("laplacian", "Fourier conjugate of multiplication by |q|^2 is minus the "
                  "Laplacian (relative)", worst, ctx.cfg.tol_stencil)


# ---------------------------------------------------------------------------
# opfield
# ---------------------------------------------------------------------------


def _decomposability(ctx: Context) -> Iterator[Outcome]:
    for name in ctx.symbols:
        d = decomposability_defect(ctx.op(name), ctx.battery)
        yield Outcome(f"decomposable-{name}", "constants of motion quantize to decomposable operators",
                      d, DECOMP_TOL)
    ctrl = PolarDiffOperator.derivative(ctx.grid, 1, 0, -1j)
    yield _lower("decomposable-control", "radial derivative is not decomposable",
                 decomposability_defect(ctrl, ctx.battery))
    leak = max(ctx.fibers(name)[1] for name in ctx.symbols)
    yield Outcome("fiber-leakage", "fiber extraction leaves nothing off the diagonal", leak, LEAKAGE_TOL)


def _routes(ctx: Context) -> Iterator[Outcome]:
    worst = 0.0
    for name in ctx.symbols:
        F, leak = ctx.fibers(name)
        a, _ = nabla_hat_commutator(ctx.X0, ctx.op(name), leakage=leak)
        b = nabla_hat_trivialized(ctx.X0, F)
        worst = max(worst, (a - b).max_norm())
    yield Outcome("nabla-hat-routes", "commutator and trivialized derivative of fields agree",
                  worst, ctx.cfg.tol_stencil)


def _adjoint_compat(ctx: Context) -> Iterator[Outcome]:
    s = ctx.symbols
    u = s["q2_l12"] + 1j * s["l12_sq"]
    O, Oc = quantize_diffop(u, ctx.grid), quantize_diffop(u.conj(), ctx.grid)
    dA, _ = nabla_hat_commutator(ctx.X0, O)
    dAc, _ = nabla_hat_commutator(ctx.X0, Oc)
    d = (dA.adjoint() - dAc).max_norm()
    yield Outcome("nabla-hat-adjoint", "field derivative commutes with the adjoint",
                  d, ctx.cfg.tol_exact)


def _operator_leibniz(ctx: Context) -> Iterator[Outcome]:
    A, _ = ctx.fibers("q2_l12")
    B, _ = ctx.fibers("l12_sq")
    C = A + B * 1j
    worst = 0.0
    for X in (ctx.X0, ctx.X2):
        lhs = nabla_hat_trivialized(X, A @ C)
        dA, dC = nabla_hat_trivialized(X, A), nabla_hat_trivialized(X, C)
        rhs = dA @ C.restrict(dA.rows) + A.restrict(dC.rows) @ dC
        worst = max(worst, (lhs - rhs).max_norm() / max(lhs.max_norm(), 1.0))
    yield Outcome("nabla-hat-leibniz", "field derivative of products obeys Leibniz (relative)",
                  worst, ctx.cfg.tol_exact)


def _unit_angular(g: PolarGrid, coeffs: dict[int, complex]) -> np.ndarray:
    v = sum(c * np.exp(1j * m * g.theta) for m, c in coeffs.items())
    return v / math.sqrt(float(np.vdot(v, v).real) * g.v_weight)


def _transport(ctx: Context) -> Iterator[Outcome]:
    g = ctx.grid
    A, _ = ctx.fibers("q2_l12")
    dA = nabla_hat_trivialized(ctx.X0, A)
    rng = np.random.default_rng(ctx.cfg.seed + 3)
    worst = -math.inf
    for _ in range(100):
        v = _unit_angular(g, {m: complex(*rng.normal(size=2)) for m in range(-3, 4)})
        w = _unit_angular(g, {m: complex(*rng.normal(size=2)) for m in range(-3, 4)})
        t = int(rng.integers(1, 13)) * int(rng.choice([-1, 1])) * g.ds / 2
        r = transport_estimate_check(A, ctx.X0, t, v, w, 1.0, dA)
        worst = max(worst, r.lhs - r.rhs)
    yield Outcome("transport-random", "transport estimate on random draws (largest lhs - rhs)",
                  worst, 0.0)
    v = _unit_angular(g, {1: 1.0})
    t = 0.25
    r = transport_estimate_check(A, ctx.X0, t, v, v, 1.0, dA)
    err = max(abs(r.lhs - (math.exp(2 * t) - 1)), abs(r.rhs - 2 * t * math.exp(2 * t)))
    yield Outcome("transport-closed-form", "transport estimate in the closed-form case",
                  err, ctx.cfg.tol_stencil)


def _battery_pairs(ctx: Context):
    # every section appears on both sides; offsets mix profiles and modes
    secs = ctx.battery
    k = len(secs)
    return [(secs[i], secs[(i + o) % k]) for i in range(k) for o in (0, 1, 5)]


def _rank_one(ctx: Context) -> Iterator[Outcome]:
    pairs = _battery_pairs(ctx)
    nrm = 0.0
    for a, b in pairs:
        R = rank_one_field(a, b)
        nrm = max(nrm, float(np.max(np.abs(R.norms() - fiber_norms(a) * fiber_norms(b)))))
    yield Outcome("rank-one-norm", "norm of a rank-one fiber is the product of norms", nrm, UNITARY_TOL)
    for X, info in ((ctx.X0, False), (ctx.X2, True)):
        d = max(rank_one_derivative_defect(X, a, b) for a, b in pairs)
        yield Outcome(f"rank-one-derivative-{X.label}", "derivative of rank-one fields",
                      d, None if info else ctx.cfg.tol_stencil)
    mod = max(norm_continuity_modulus(ctx.fibers(name)[0]) for name in ("l12", "l12_sq"))
    yield Outcome("norm-continuity-horizontal", "horizontal fields have constant fiber norms",
                  mod, ctx.cfg.tol_exact)


def _pointwise_weak(ctx: Context) -> Iterator[Outcome]:
    worst = 0.0
    for name in ("q2", "q2_l12", "l12_sq", "one_plus_l12_sq_q2"):
        F, _ = ctx.fibers(name)
        dA = nabla_hat_trivialized(ctx.X0, F)
        r = pointwise_weak_derivative_check(ctx.symbols[name], grid=ctx.grid, dA=dA)
        worst = max(worst, r.max_defect, r.endpoint_defect)
    yield Outcome("pointwise-weak", "weak t-derivative of transported operators", worst, POINTWISE_TOL)


# ---------------------------------------------------------------------------
# theorem-xu and horizontal
# ---------------------------------------------------------------------------


def _derivative_formula(ctx: Context) -> Iterator[Outcome]:
    for name, u in ctx.symbols.items():
        for X in (ctx.X0, ctx.X2):
            r = derivative_formula_check(u, X, ctx.grid)
            yield Outcome(f"derivative-formula-{name}-{X.label}",
                          "field derivative of a quantized constant of motion",
                          max(r.discrepancy, r.route_gap), ctx.cfg.tol_stencil)
    X = RadialVectorField.polynomial([1.0], label="a=1")
    r = derivative_formula_check(ctx.symbols["q2_l12"], X, ctx.grid, check_preconditions=False)
    yield Outcome("derivative-formula-exploratory-a=1",
                  "derivative formula for a field outside the proven family", r.discrepancy, None)


def _horizontality(ctx: Context) -> Iterator[Outcome]:
    reports = {}
    for name in ctx.symbols:
        r = reports[name] = horizontality_report(ctx.op(name), tol=ctx.cfg.tol_exact)
        yield Outcome(f"horizontality-consistent-{name}",
                      "equivalent horizontality statements agree (0 = agree)",
                      0.0 if r.consistent else 1.0, 0.0)
    for name in ("l12", "l12_sq"):
        r = reports[name]
        d = max(r.defect_a, r.defect_b, r.defect_c, r.defect_d)
        yield Outcome(f"horizontal-angular-{name}", "functions of angular momentum are horizontal",
                      d, ctx.cfg.tol_exact)


Check = Callable[[Context], Iterator[Outcome]]

SUITES: dict[str, tuple[Check, ...]] = {
    "poisson": (_poisson_algebra, _flow_generator, _constants_of_motion, _poisson_connection),
    "weyl": (_kernel_basics, _linearity, _cross_backend, _adjoint, _covariance, _q2_commutation),
    "field": (_trivialization, _parseval, _connection, _trivialized_derivative, _flow_derivative,
              _dilations, _hx, _horizontal_sections, _laplacian),
    "opfield": (_decomposability, _routes, _adjoint_compat, _operator_leibniz, _transport,
                _rank_one, _pointwise_weak),
    "theorem-xu": (_derivative_formula,),
    "horizontal": (_horizontality,),
}


def suite_names() -> list[str]:
    return list(SUITES) + ["all"]


def run_checks(name: str, config) -> Iterator[tuple[Check, list[Outcome]]]:
    """Run the checks of one suite (not ``all``), yielding each with its outcomes."""
    ctx = Context(config)
    for check in SUITES[name]:
        yield check, list(check(ctx))
