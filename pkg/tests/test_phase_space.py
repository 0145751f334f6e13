import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from opfield.phase_space import (
    DimensionMismatchError,
    LinearSymplecticMap,
    NonPolynomialError,
    NotConstantOfMotionError,
    PolySymbol,
    RadialVectorField,
    angular_momentum,
    euler_symbol,
    flow_generator_defect,
    flow_pullback,
    hamiltonian_lift_symbol,
    is_constant_of_motion,
    moment_map_pushforward,
    norm_q2,
    poisson_bracket,
    poisson_connection_apply,
    poisson_connection_identity_check,
    radial_lift,
    random_symbol,
)


@st.composite
def symbols(draw, n=None, max_degree=4):
    n = n or draw(st.integers(1, 3))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    return random_symbol(np.random.default_rng(seed), n, max_degree,
                         n_terms=draw(st.integers(1, 5)))


@st.composite
def triples(draw):
    n = draw(st.integers(1, 3))
    return tuple(draw(symbols(n=n)) for _ in range(3))


# -- bracket against the sympy oracle -----------------------------------------


@settings(max_examples=40, deadline=None)
@given(triples())
def test_bracket_matches_sympy(uvw):
    u, v, _ = uvw
    n = u.n
    ref = oracles.coeff_dict(oracles.bracket(oracles.to_sympy(u), oracles.to_sympy(v), n), n)
    got = poisson_bracket(u, v).terms
    assert set(got) == set(ref)
    for k in ref:
        assert abs(got[k] - ref[k]) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(triples())
def test_bracket_algebra_exact(uvw):
    u, v, w = uvw
    PB = poisson_bracket
    assert (PB(u, v) + PB(v, u)).is_zero()
    assert (PB(u, v * w) - PB(u, v) * w - v * PB(u, w)).is_zero()
    assert (PB(u, PB(v, w)) + PB(v, PB(w, u)) + PB(w, PB(u, v))).is_zero()
    assert (PB(u, 3 * v - w) - 3 * PB(u, v) + PB(u, w)).is_zero()


def test_bracket_convention():
    q, p = PolySymbol.q(1, 1), PolySymbol.p(1, 1)
    assert poisson_bracket(p, q) == PolySymbol.constant(1)
    h = euler_symbol(2)
    # {h, h0} = -2 ||q||^2 for h = ||q||^2
    assert poisson_bracket(norm_q2(2), h) == -2 * norm_q2(2)


def test_bracket_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        poisson_bracket(PolySymbol.q(1, 1), PolySymbol.q(1, 2))


# -- flows ----------------------------------------------------------------------


def test_pullback_dilation_paper_example():
    # [PAPER] r_t(q, p) = (e^t q, e^-t p); t = ln 2 sends ||q||^2 to 4 ||q||^2
    u = norm_q2(2)
    v = flow_pullback(u, LinearSymplecticMap.dilation(math.log(2), 2))
    assert v.equals(4 * u, 1e-12)


def test_pullback_shear_paper_example():
    # [PAPER] alpha_t(q, p) = (q, p + 2 t q); at t = 1, q.p -> q.p + 2 ||q||^2
    v = flow_pullback(euler_symbol(2), LinearSymplecticMap.shear(1.0, 2))
    assert v.equals(euler_symbol(2) + 2 * norm_q2(2), 1e-12)


@settings(max_examples=25, deadline=None)
@given(symbols(max_degree=3), st.floats(-1.0, 1.0))
def test_pullback_matches_sympy(u, t):
    S = LinearSymplecticMap.dilation(t, u.n) @ LinearSymplecticMap.shear(0.5, u.n)
    ref = oracles.coeff_dict(oracles.pullback(oracles.to_sympy(u), S.matrix, u.n), u.n)
    got = flow_pullback(u, S)
    for k in set(ref) | set(got.terms):
        assert abs(got.coefficient(*k) - ref.get(k, 0)) <= 1e-9 * max(1.0, abs(ref.get(k, 1)))


def test_symplectic_check():
    assert LinearSymplecticMap.fourier(2).symplectic_defect() == 0.0
    with pytest.raises(ValueError):
        LinearSymplecticMap(np.diag([2.0, 1.0]))


@pytest.mark.parametrize("t", [0.0, 0.3, -0.3, 1.0, -1.0])
def test_flow_generator(t):
    rng = np.random.default_rng(5)
    for n in (1, 2, 3):
        u = random_symbol(rng, n, 4)
        q, p = rng.uniform(-1, 1, (20, n)), rng.uniform(-1, 1, (20, n))
        assert flow_generator_defect(u, q, p, t) <= 1e-8


def test_flow_generator_detects_wrong_sign():
    # the generator of the dilation flow is {h0, u}; {u, h0} is off by a sign
    u = PolySymbol.q(1, 1) ** 2 * PolySymbol.p(1, 1)
    q, p = np.array([[0.7]]), np.array([[0.4]])
    wrong = poisson_bracket(u, euler_symbol(1))(q, p)
    right = poisson_bracket(euler_symbol(1), u)(q, p)
    assert abs(wrong - right).max() > 0.1
    assert flow_generator_defect(u, q, p) <= 1e-10


# -- angular momenta and constants of motion ----------------------------------


def test_angular_momentum_paper_examples():
    Q, P = PolySymbol.q, PolySymbol.p
    assert angular_momentum(1, 2, 2) == Q(1, 2) * P(2, 2) - Q(2, 2) * P(1, 2)
    assert angular_momentum(1, 3, 3) == Q(1, 3) * P(3, 3) - Q(3, 3) * P(1, 3)
    with pytest.raises(IndexError):
        angular_momentum(2, 1, 2)


def test_constants_of_motion(symbols):
    h = norm_q2(2)
    for u in symbols.values():
        assert is_constant_of_motion(u, h)
    assert not is_constant_of_motion(euler_symbol(2), h)
    syms = list(symbols.values())
    for u in syms:
        for v in syms:
            assert is_constant_of_motion(poisson_bracket(u, v), h)
        for k in (1, 2, 3):
            assert is_constant_of_motion(poisson_connection_apply(RadialVectorField.monomial(k), u), h)


def test_moment_map_pushforward():
    a = PolySymbol(1, {((2,), (0,)): 1.0, ((1,), (0,)): 2.0})
    l12 = angular_momentum(1, 2, 2)
    pushed = moment_map_pushforward(a, [l12])
    assert pushed == l12 * l12 + 2 * l12
    for k in (1, 2, 3):
        hX = hamiltonian_lift_symbol(RadialVectorField.monomial(k), 2)
        assert is_constant_of_motion(pushed, hX)
    assert is_constant_of_motion(pushed, norm_q2(2))
    with pytest.raises(DimensionMismatchError):
        moment_map_pushforward(a, [l12, l12])


# -- radial vector fields and lifts --------------------------------------------


def test_x0_lift_paper_example():
    # [PAPER] X0 = 2 lam d/dlam lifts to sum q_j d/dq_j: b = 1 and div = n
    X0 = RadialVectorField.x0()
    lam = np.array([0.3, 1.0, 5.0])
    for n in (1, 2, 3):
        lift = radial_lift(X0, n)
        assert np.allclose(lift.b(lam), 1.0)
        assert np.allclose(lift.divergence(lam), n)
    # [PAPER] h0 = sum q_j p_j
    assert hamiltonian_lift_symbol(X0, 2) == euler_symbol(2)


def test_lift_divergence_numeric():
    # divergence of b(|q|^2) q in R^n by finite differences
    X = RadialVectorField.monomial(3, 1.5)
    lift = radial_lift(X, 3)
    x = np.array([0.4, -0.7, 0.9])
    h = 1e-5
    div = 0.0
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        fp = lift.b(np.sum((x + e) ** 2)) * (x + e)[j]
        fm = lift.b(np.sum((x - e) ** 2)) * (x - e)[j]
        div += (fp - fm) / (2 * h)
    assert abs(div - lift.divergence(np.sum(x ** 2))) < 1e-8


def test_vector_field_bracket_and_flow():
    X, Y = RadialVectorField.monomial(1), RadialVectorField.monomial(2)
    lam = np.linspace(0.5, 3, 5)
    B = X.bracket(Y)
    ref = X(lam) * Y.derivative(lam) - Y(lam) * X.derivative(lam)
    assert np.allclose(B(lam), ref)
    assert math.isclose(RadialVectorField.x0().flow(1.0, 0.25), math.exp(0.5))
    Z = RadialVectorField.polynomial([0.0, 1.0, 0.5])
    sol = Z.flow(1.0, 0.2)
    # separable: d lam / (lam + lam^2/2) = dt
    ref = 2 * math.exp(0.2) / (3 - math.exp(0.2))
    assert abs(sol - ref) < 1e-9


def test_lift_needs_vanishing_constant_term():
    with pytest.raises(NonPolynomialError):
        RadialVectorField.polynomial([1.0]).lift_coeffs()


def test_poisson_connection_identities(symbols):
    Xs = [RadialVectorField.monomial(k) for k in (1, 2, 3)]
    syms = list(symbols.values())
    for X in Xs:
        for Y in Xs:
            for u, v in zip(syms, syms[1:]):
                r = poisson_connection_identity_check(X, Y, u, v)
                assert r.holds_a and r.holds_b


def test_poisson_connection_requires_constant_of_motion():
    with pytest.raises(NotConstantOfMotionError):
        poisson_connection_apply(RadialVectorField.x0(), euler_symbol(2))


# -- evaluation and text round trip --------------------------------------------


@settings(max_examples=30, deadline=None)
@given(symbols())
def test_evaluate_matches_sympy(u):
    q, p = oracles.coords(u.n)
    f = sp.lambdify(list(q) + list(p), oracles.to_sympy(u), "numpy")
    rng = np.random.default_rng(0)
    Q, P = rng.uniform(-1, 1, (7, u.n)), rng.uniform(-1, 1, (7, u.n))
    ref = f(*Q.T, *P.T)
    assert np.allclose(u(Q, P), ref, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(symbols())
def test_text_round_trip(u):
    v = PolySymbol.from_text((u * (0.5 + 0.25j)).to_text(), u.n)
    assert v == u * (0.5 + 0.25j)


def test_text_errors():
    with pytest.raises(ValueError):
        PolySymbol.from_text("alpha=(1) beta=(0,0) 1 0")
    with pytest.raises(ValueError):
        PolySymbol.from_text("# nothing\n")
    assert PolySymbol.from_text("", 2).is_zero()
