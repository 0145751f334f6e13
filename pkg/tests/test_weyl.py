import numpy as np
import pytest
import sympy as sp

import oracles
from opfield.battery import RingFunction, hermite_functions, ring_functions
from opfield.grids import CartesianGrid, GridMismatchError, PolarSection
from opfield.phase_space import PolySymbol, angular_momentum, euler_symbol, norm_q2
from opfield.weyl import (
    GridTooLargeError,
    InterpolationWarning,
    SymbolDegreeError,
    adjoint_identity_check,
    covariance_check,
    cross_backend_check,
    direct_inner,
    metaplectic_dilation,
    q2_commutation_check,
    quantize_diffop,
    quantize_kernel,
)

Q1, P1 = PolySymbol.q(1, 1), PolySymbol.p(1, 1)
x_sym = sp.Symbol("x", real=True)
XY = sp.symbols("x y", real=True)


def _rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


# -- kernel backend, n = 1 -------------------------------------------------------


@pytest.mark.parametrize("u", [
    Q1 * Q1,
    P1 * P1,
    Q1 * P1,
    Q1 * Q1 * P1 * P1 + 0.5j * Q1 * P1 ** 3,
    3 * Q1 ** 3 * P1 - P1 + 2,
], ids=["q2", "p2", "qp", "mixed", "cubic"])
def test_kernel_matches_mccoy_on_hermite(u):
    grid = CartesianGrid(1, 96, 9.0)
    K = quantize_kernel(u, grid)
    pts = grid.x[:, None]
    inner = np.abs(grid.x) < 5.0
    for k in range(4):
        f = sp.exp(-x_sym ** 2 / 2) * sp.hermite(k, x_sym)
        ref = oracles.weyl_apply_numeric(u, f, [x_sym], pts)
        vals = sp.lambdify(x_sym, f, "numpy")(grid.x).astype(np.complex128)
        got = K.apply(vals)
        assert _rel(got[inner], ref[inner]) < 1e-9


def test_kernel_of_constant_is_identity():
    grid = CartesianGrid(1, 32, 4.0)
    K = quantize_kernel(PolySymbol.constant(1, 1.0), grid)
    assert np.allclose(K.matrix, np.eye(32), atol=1e-13)
    grid2 = CartesianGrid(2, 8, 2.0)
    K2 = quantize_kernel(PolySymbol.constant(2, 1.0), grid2)
    assert np.allclose(K2.matrix, np.eye(64), atol=1e-13)


def test_kernel_of_position_is_multiplication():
    grid = CartesianGrid(2, 8, 2.0)
    q2 = norm_q2(2)
    K = quantize_kernel(q2, grid)
    d = np.sum(grid.points() ** 2, axis=1)
    assert np.allclose(K.matrix, np.diag(d), atol=1e-12)


def test_kernel_hermitian_for_real_symbol():
    grid = CartesianGrid(1, 48, 6.0)
    K = quantize_kernel(Q1 * Q1 * P1 + P1 * Q1 ** 3, grid)
    assert np.linalg.norm(K.matrix - K.matrix.conj().T, 2) < 1e-10


def test_kernel_memory_cap(monkeypatch):
    with pytest.raises(GridTooLargeError):
        quantize_kernel(norm_q2(2), CartesianGrid(2, 64, 3.0), max_bytes=10_000)
    monkeypatch.setenv("OPFIELD_KERNEL_MAX_BYTES", "1000")
    with pytest.raises(GridTooLargeError):
        quantize_kernel(Q1, CartesianGrid(1, 16, 2.0))


def test_kernel_accepts_callable():
    grid = CartesianGrid(1, 32, 5.0)

    def u(q, p):
        return np.exp(-q[..., 0] ** 2)

    K = quantize_kernel(u, grid)
    assert np.allclose(K.matrix, np.diag(np.exp(-grid.x ** 2)), atol=1e-12)


# -- diffop backend -------------------------------------------------------------


@pytest.mark.parametrize("name", ["q2", "l12", "q2_l12", "l12_sq", "q4", "one_plus_l12_sq_q2"])
def test_polar_diffop_matches_mccoy_on_rings(name, symbols, grid):
    u = symbols[name]
    D = quantize_diffop(u, grid)
    x, y = grid.cartesian_points()
    pts = np.stack([x.ravel(), y.ravel()], axis=1)
    for ring in ring_functions():
        f = oracles.ring_expr(*XY, ring.r0, ring.sigma, ring.m)
        ref = oracles.weyl_apply_numeric(u, f, list(XY), pts).reshape(grid.shape)
        got = D.apply(ring.on_polar(grid))
        rows = grid.interior()
        err = np.linalg.norm((got - ref)[rows]) / max(np.linalg.norm(ref[rows]),
                                                        np.linalg.norm(ring.on_polar(grid)[rows]))
        assert err < 1e-5, (name, ring.m, err)


def test_op_l12_is_angular_derivative(grid, sections):
    D = quantize_diffop(angular_momentum(1, 2, 2), grid)
    for m in range(-3, 4):
        v = np.exp(-(grid.s[:, None]) ** 2 * 4) * np.exp(1j * m * grid.theta)[None, :]
        assert np.allclose(D.apply(v), m * v, atol=1e-12)
    assert D.is_fiberwise


def test_op_l12_sq_eigenvalues(grid):
    # m^2 + 1/2 in the Weyl ordering: the 1/2 comes from symmetrizing q_i p_j
    D = quantize_diffop(angular_momentum(1, 2, 2) ** 2, grid)
    for m in range(-3, 4):
        v = np.ones(grid.S)[:, None] * np.exp(1j * m * grid.theta)[None, :]
        assert np.allclose(D.apply(v), (m * m + 0.5) * v, atol=1e-10)


def test_op_euler_symbol(grid, sections):
    # Op(q.p) = -i (x.grad + n/2) = -i (2 d/ds + 1)
    D = quantize_diffop(euler_symbol(2), grid)
    from opfield.grids import d_s

    for phi in sections[:4]:
        ref = -1j * (2 * d_s(phi.values, grid) + phi.values)
        # the symmetrized stencil differs from d_s at the truncation order
        assert np.abs(D.apply(phi.values) - ref).max() < 1e-5 * np.abs(ref).max()


def test_diffop_degree_and_dimension_errors(grid):
    with pytest.raises(SymbolDegreeError):
        quantize_diffop(P1 ** 3, CartesianGrid(1, 16, 2.0))
    with pytest.raises(GridMismatchError):
        quantize_diffop(Q1, grid)


@pytest.mark.parametrize("u", [Q1 * Q1, P1 * P1, Q1 * P1, Q1 ** 2 * P1 ** 2 - 1j * P1],
                         ids=["q2", "p2", "qp", "mixed"])
def test_cartesian_diffop_matches_kernel(u):
    assert cross_backend_check(u) < 1e-7


@pytest.mark.parametrize("name", ["q2", "l12", "q2_l12", "l12_sq"])
def test_cross_backend_n2(name, symbols):
    assert cross_backend_check(symbols[name]) < 1e-3


def test_adjoint_identities(symbols, grid, sections):
    assert adjoint_identity_check(Q1 ** 2 * P1 + 1j * P1 ** 2) < 1e-10
    for u in symbols.values():
        assert adjoint_identity_check(u * (1 + 0.5j), "diffop", grid, sections) < 1e-8
    with pytest.raises(ValueError):
        adjoint_identity_check(Q1, "bogus")


def test_direct_inner_weights(grid):
    # fiber measure pi/M per angle cell: a unit angular mode has fiber norm^2 = pi
    v = np.zeros(grid.shape, complex)
    v[10] = 1.0
    assert np.isclose(direct_inner(grid, v, v), np.pi * grid.lam[10] * grid.ds)


# -- dilation covariance ---------------------------------------------------------


def test_polar_dilation_is_shift(grid, sections):
    t = 2 * grid.ds / 2  # two cells
    W = metaplectic_dilation(t, grid)
    assert W.exact and W.shift == 2
    out = W.apply(sections[0].values)
    assert np.allclose(out[:-2], np.e ** t * sections[0].values[2:])


def test_non_shift_dilation_warns(grid, sections):
    W = metaplectic_dilation(0.01, grid)
    with pytest.warns(InterpolationWarning):
        out = W(sections[0])
    assert out.interpolated


@pytest.mark.parametrize("name", ["q2", "l12", "q2_l12", "l12_sq"])
def test_covariance_polar(name, symbols, grid, sections):
    for k in (1, 2, -3):
        assert covariance_check(symbols[name], k * grid.ds / 2, grid, sections) < 1e-6


def test_covariance_cartesian():
    grid = CartesianGrid(1, 128, 12.0)
    for u in (Q1 * Q1, Q1 * P1 + P1 ** 2):
        assert covariance_check(u, 0.2, grid) < 1e-8


def test_q2_commutation(symbols, grid, sections):
    for u in symbols.values():
        assert q2_commutation_check(u, 0.7, grid, sections) < 1e-10
    # a non-constant of motion does not commute
    assert q2_commutation_check(euler_symbol(2), 0.7, grid, sections) > 0.1


def test_ring_function_norm_closed_form():
    for r in ring_functions():
        assert np.isclose(r.norm2_exact(), oracles.gaussian_ring_norm2(r.r0, r.sigma), rtol=1e-12)


def test_polar_section_from_ring_has_expected_norm(grid):
    r = RingFunction(1.5, 0.22, 2)
    # with the pi/M fiber weight the direct integral norm is int |f|^2 dx
    # (d lam = 2 r dr and dtheta weight 2 pi/M halves back to r dr dtheta)
    v = r.on_polar(grid)
    assert np.isclose(direct_inner(grid, v, v).real, r.norm2_exact(), rtol=1e-8)


def test_hermite_functions_orthonormal():
    grid = CartesianGrid(1, 64, 8.0)
    H = np.stack(hermite_functions(grid, 6))
    G = H.conj() @ H.T * grid.dx
    assert np.allclose(G, np.eye(6), atol=1e-12)
    for k in range(6):
        assert np.allclose(H[k], oracles.hermite(k, grid.x), atol=1e-13)


def test_polar_section_wrapping(grid, sections):
    D = quantize_diffop(norm_q2(2), grid)
    out = D(sections[0])
    assert isinstance(out, PolarSection)
    assert np.allclose(out.values, grid.lam[:, None] * sections[0].values)
