import json

import numpy as np
import pytest

from opfield import io as oio
from opfield.grids import CartesianGrid, PolarGrid
from opfield.op_field import OperatorField
from opfield.phase_space import PolySymbol, angular_momentum
from opfield.weyl import DenseOperator, quantize_diffop, quantize_kernel


def test_symbol_round_trip(tmp_path, symbols):
    for name, u in symbols.items():
        p = tmp_path / f"{name}.sym"
        oio.save_symbol(u * (1 - 0.5j), p)
        assert oio.load_symbol(p) == u * (1 - 0.5j)
        assert json.loads((tmp_path / f"{name}.sym.json").read_text()) == {"kind": "symbol", "n": 2}


def test_symbol_without_sidecar(tmp_path):
    p = tmp_path / "u.sym"
    p.write_text(angular_momentum(1, 2, 2).to_text())
    assert oio.load_symbol(p) == angular_momentum(1, 2, 2)


def test_section_round_trip(tmp_path, sections):
    p = tmp_path / "phi.bin"
    oio.save_section(sections[7], p)
    back = oio.load_section(p)
    assert back.grid == sections[7].grid
    assert np.array_equal(back.values, sections[7].values)


def test_operator_round_trip(tmp_path):
    g = CartesianGrid(1, 16, 3.0)
    K = quantize_kernel(PolySymbol.q(1, 1) * PolySymbol.p(1, 1), g)
    p = tmp_path / "k.bin"
    oio.save_operator(K, p)
    back = oio.load_operator(p)
    assert back.grid == g and np.array_equal(back.matrix, K.matrix)


def test_diff_operator_is_densified(tmp_path):
    g = PolarGrid(S=24, M=8)
    D = quantize_diffop(angular_momentum(1, 2, 2), g)
    p = tmp_path / "d.bin"
    oio.save_operator(D, p)
    back = oio.load_operator(p)
    assert isinstance(back, DenseOperator) and back.grid == g
    v = np.random.default_rng(0).normal(size=g.shape).astype(complex)
    assert np.allclose(back.apply(v), D.apply(v))
    with pytest.raises(TypeError):
        oio.save_operator(object(), p)


def test_field_round_trip(tmp_path):
    g = PolarGrid(S=24, M=8)
    F = OperatorField(g, np.random.default_rng(1).normal(size=(4, 8, 8)), np.arange(10, 14))
    p = tmp_path / "f.bin"
    oio.save_field(F, p)
    back = oio.load_field(p)
    assert np.array_equal(back.rows, F.rows) and np.array_equal(back.fibers, F.fibers)


def test_format_errors(tmp_path, sections):
    p = tmp_path / "phi.bin"
    oio.save_section(sections[0], p)
    with pytest.raises(oio.FormatError):
        oio.load_operator(p)  # sidecar kind mismatch
    p.write_bytes(p.read_bytes()[:-16])
    with pytest.raises(oio.FormatError):
        oio.load_section(p)  # truncated payload
    (tmp_path / "phi.bin.json").write_text("{not json")
    with pytest.raises(oio.FormatError):
        oio.load_section(p)
    with pytest.raises(oio.FormatError):
        oio.load_section(tmp_path / "missing.bin")
    with pytest.raises(oio.FormatError):
        oio.grid_from_meta({"type": "hex"})


def test_grid_meta_round_trip():
    for g in (PolarGrid(S=32, M=16, s_min=-1.0, s_max=1.5), CartesianGrid(2, 12, 2.5)):
        assert oio.grid_from_meta(json.loads(json.dumps(oio.grid_meta(g)))) == g
