import numpy as np
import pytest

from opfield.battery import narrow_battery
from opfield.grids import GridMismatchError, OffGridError, PolarGrid
from opfield.hilbert_field import fiber_norms
from opfield.op_field import (
    ExcessiveLeakageError,
    OperatorField,
    decomposability_defect,
    derivative_formula_check,
    extract_fibers,
    horizontality_report,
    local_sup_norm,
    nabla_hat_commutator,
    nabla_hat_trivialized,
    norm_continuity_modulus,
    parallel_transport_conjugate,
    plateau_extension,
    pointwise_weak_derivative_check,
    rank_one_derivative_defect,
    rank_one_field,
    transport_estimate_check,
)
from opfield.phase_space import RadialVectorField, euler_symbol
from opfield.weyl import quantize_diffop


@pytest.fixture(scope="module")
def fields(ops):
    return {k: extract_fibers(O) for k, O in ops.items()}


def _modes(grid, ms=range(-3, 4)):
    return np.stack([np.exp(1j * m * grid.theta) for m in ms])


# -- fibers -----------------------------------------------------------------------


def test_fibers_are_exact_for_quantized_constants(fields):
    for name, (F, leak) in fields.items():
        assert leak < 1e-10, name


def test_fibers_of_q2_and_q2_l12(grid, fields):
    Fq, _ = fields["q2"]
    assert np.allclose(Fq.fibers, grid.lam[:, None, None] * np.eye(grid.M), atol=1e-12)
    F, _ = fields["q2_l12"]
    for m, v in zip(range(-3, 4), _modes(grid)):
        out = np.einsum("kij,j->ki", F.fibers, v)
        assert np.allclose(out, grid.lam[:, None] * m * v[None, :], atol=1e-10)


def test_fibers_of_l12_sq(grid, fields):
    F, _ = fields["l12_sq"]
    for m, v in zip(range(-3, 4), _modes(grid)):
        out = np.einsum("kij,j->ki", F.fibers, v)
        assert np.allclose(out, (m * m + 0.5) * v[None, :], atol=1e-10)


def test_decomposability(ops, grid, sections):
    for O in ops.values():
        assert decomposability_defect(O, sections) < 1e-10
    O = quantize_diffop(euler_symbol(2), grid)
    assert decomposability_defect(O, sections) > 0.05


def test_leakage_error(grid):
    O = quantize_diffop(euler_symbol(2), grid)
    _, leak = extract_fibers(O)
    assert leak > 1.0
    with pytest.raises(ExcessiveLeakageError):
        nabla_hat_commutator(RadialVectorField.x0(), O)


def test_operator_field_validation(grid):
    with pytest.raises(ValueError):
        OperatorField(grid, np.zeros((3, grid.M, grid.M)))
    with pytest.raises(ValueError):
        OperatorField(grid, np.full((grid.S, grid.M, grid.M), np.nan))
    F = OperatorField(grid, np.zeros((grid.S, grid.M, grid.M)))
    sub = F.restrict(np.arange(10, 20))
    with pytest.raises(ValueError):
        sub.restrict([3])
    with pytest.raises(ValueError):
        sub.apply(np.ones(grid.shape))
    with pytest.raises(GridMismatchError):
        F + OperatorField(PolarGrid(S=32, M=64), np.zeros((32, 64, 64)))


def test_operator_field_algebra(fields):
    A, _ = fields["l12"]
    B, _ = fields["q2"]
    C = A @ B - B @ A
    assert C.max_norm() < 1e-9
    assert np.allclose((2 * A).fibers, (A + A).fibers)
    assert np.allclose(A.adjoint().fibers, A.fibers, atol=1e-12)


# -- derivatives ------------------------------------------------------------------------


def test_nabla_hat_of_q2(grid, fields, X0):
    # A(lam) = lam I and X0 = 2 lam d/dlam, so the derivative is 2 lam I
    F, _ = fields["q2"]
    d = nabla_hat_trivialized(X0, F)
    ref = 2 * grid.lam[d.rows][:, None, None] * np.eye(grid.M)
    assert np.abs(d.fibers - ref).max() < 1e-10


def test_l12_field_is_horizontal(fields, ops, X0, X2):
    F, _ = fields["l12"]
    assert nabla_hat_trivialized(X0, F).max_norm() < 1e-10
    assert nabla_hat_trivialized(X2, F).max_norm() < 1e-10
    r = horizontality_report(ops["l12"])
    assert r.consistent and r.a
    r = horizontality_report(fields["q2_l12"][0])
    assert r.consistent and not r.a


def test_product_rule_with_scalar(grid, fields, X0):
    # nabla(f A) = X(f) A + f nabla A with f = lam
    A, _ = fields["l12_sq"]
    lam = grid.lam
    lhs = nabla_hat_trivialized(X0, A.scale_rows(lam))
    rhs = nabla_hat_trivialized(X0, A)
    rhs = rhs.scale_rows(lam[rhs.rows]) + A.restrict(rhs.rows).scale_rows(2 * lam[rhs.rows])
    # the stencil differentiates lam = e^s only to its truncation order
    assert (lhs - rhs).max_norm() < 1e-8 * rhs.max_norm()


def test_commutator_and_trivialized_routes_agree(ops, fields, X0, X2):
    for name in ("q2", "q2_l12", "one_plus_l12_sq_q2"):
        for X in (X0, X2):
            a, _ = nabla_hat_commutator(X, ops[name], leakage=fields[name][1])
            b = nabla_hat_trivialized(X, fields[name][0])
            d = a - b
            assert d.max_norm() < 1e-8 * max(1.0, b.max_norm()), (name, X.label)


def test_plateau_extension(grid):
    chi = plateau_extension(grid, 30)
    assert np.all(chi[25:36] == 1.0)
    assert chi[17] == 0.0 and chi[43] == 0.0
    assert np.all((chi >= 0) & (chi <= 1))


@pytest.mark.parametrize("name", ["q2", "q4", "q2_l12", "one_plus_l12_sq_q2"])
def test_derivative_formula(name, symbols, X0, X2):
    for X in (X0, X2):
        r = derivative_formula_check(symbols[name], X)
        assert r.discrepancy <= 1e-6 * max(1.0, r.scale)
        assert r.route_gap <= 1e-6 * max(1.0, r.scale)


def test_derivative_formula_preconditions(symbols):
    with pytest.raises(ValueError):
        derivative_formula_check(euler_symbol(2), RadialVectorField.x0())
    with pytest.raises(ValueError):
        derivative_formula_check(symbols["q2"], RadialVectorField.polynomial([0.0, 1.0, 1.0]))


def test_transport_estimate(grid, fields, X0):
    A, _ = fields["q2_l12"]
    dA = nabla_hat_trivialized(X0, A)
    rng = np.random.default_rng(3)
    for _ in range(10):
        v = rng.normal(size=grid.M) + 1j * rng.normal(size=grid.M)
        w = rng.normal(size=grid.M) + 1j * rng.normal(size=grid.M)
        t = float(rng.choice([-1, 1]) * grid.ds / 2 * rng.integers(1, 6))
        r = transport_estimate_check(A, X0, t, v, w, 1.0, dA)
        assert r.holds
    with pytest.raises(OffGridError):
        transport_estimate_check(A, X0, 1.9, v, w, 1.0, dA)


def test_parallel_transport_conjugate(fields, grid):
    A, _ = fields["q2"]
    U = parallel_transport_conjugate(A, 1.0)
    i0 = grid.index_of_lam(1.0)
    assert np.allclose(U.fibers, A.fibers[i0][None])
    with pytest.raises(OffGridError):
        parallel_transport_conjugate(A.restrict(np.arange(40, 50)), 1.0)


def test_pointwise_weak_derivative(symbols, grid):
    r = pointwise_weak_derivative_check(symbols["q2_l12"], battery=narrow_battery(grid)[:2])
    assert r.max_defect < 1e-6
    assert r.endpoint_defect < 1e-12


# -- rank-one fields and norms ------------------------------------------------------------


def test_rank_one_norm_is_product_of_fiber_norms(sections):
    for a, b in zip(sections, sections[5:]):
        F = rank_one_field(a, b)
        assert np.allclose(F.norms(), fiber_norms(a) * fiber_norms(b), atol=1e-14)


def test_rank_one_derivative(sections, X0, X2):
    for a, b in zip(sections, sections[1:]):
        assert rank_one_derivative_defect(X0, a, b) <= 1e-6
        assert rank_one_derivative_defect(X2, a, b) <= 2e-6


def test_norm_continuity_and_local_sup(fields, grid):
    A, _ = fields["q2"]
    assert np.isclose(norm_continuity_modulus(A), 1.0)
    assert np.isclose(local_sup_norm(A, (1.0, 2.0)), grid.lam[grid.lam <= 2.0 * (1 + 1e-12)].max())
    with pytest.raises(OffGridError):
        local_sup_norm(A, (100.0, 200.0))
