"""Serialization of symbols, sections, operators and operator fields.

Binary payloads are raw row-major ``complex128``; metadata lives in a JSON
sidecar named ``<path>.json``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .grids import CartesianGrid, PolarGrid, PolarSection
from .op_field import OperatorField
from .phase_space import PolySymbol
from .weyl import CartesianDiffOperator, DenseOperator, PolarDiffOperator

__all__ = [
    "FormatError",
    "save_symbol",
    "load_symbol",
    "save_section",
    "load_section",
    "save_operator",
    "load_operator",
    "save_field",
    "load_field",
    "grid_meta",
    "grid_from_meta",
]


class FormatError(ValueError):
    """Raised when a file or its sidecar is malformed."""


def _sidecar(path) -> Path:
    p = Path(path)
    return p.with_name(p.name + ".json")


def _write_meta(path, meta: dict) -> None:
    _sidecar(path).write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n")


def _read_meta(path, kind: str) -> dict:
    try:
        meta = json.loads(_sidecar(path).read_text())
    except FileNotFoundError:
        raise FormatError(f"missing sidecar {_sidecar(path)}") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"bad sidecar: {exc}") from None
    if meta.get("kind") != kind:
        raise FormatError(f"sidecar describes {meta.get('kind')!r}, expected {kind!r}")
    return meta


def grid_meta(grid) -> dict:
    if isinstance(grid, PolarGrid):
        return {"type": "polar", **grid.meta()}
    return {"type": "cartesian", "n": grid.n, "N": grid.N, "L": grid.L}


def grid_from_meta(meta: dict):
    kind = meta.get("type")
    if kind == "polar":
        return PolarGrid(S=int(meta["S"]), M=int(meta["M"]), s_min=float(meta["s_min"]),
                         s_max=float(meta["s_max"]), n=int(meta["n"]))
    if kind == "cartesian":
        return CartesianGrid(int(meta["n"]), int(meta["N"]), float(meta["L"]))
    raise FormatError(f"unknown grid type {kind!r}")


def _read_array(path, count: int) -> np.ndarray:
    data = np.fromfile(path, dtype=np.complex128)
    if data.size != count:
        raise FormatError(f"{path}: expected {count} complex values, found {data.size}")
    return data


# symbols ---------------------------------------------------------------------


def save_symbol(u: PolySymbol, path) -> None:
    Path(path).write_text(u.to_text())
    _write_meta(path, {"kind": "symbol", "n": u.n})


def load_symbol(path) -> PolySymbol:
    """Read a symbol; the sidecar is optional when the text has terms."""
    text = Path(path).read_text()
    n = None
    if _sidecar(path).exists():
        n = int(_read_meta(path, "symbol")["n"])
    return PolySymbol.from_text(text, n)


# sections --------------------------------------------------------------------


def save_section(phi: PolarSection, path) -> None:
    np.ascontiguousarray(phi.values, dtype=np.complex128).tofile(path)
    _write_meta(path, {"kind": "section", **phi.grid.meta()})


def load_section(path) -> PolarSection:
    meta = _read_meta(path, "section")
    grid = grid_from_meta({"type": "polar", **meta})
    data = _read_array(path, grid.S * grid.M)
    return PolarSection(grid, data.reshape(grid.shape))


# operators -------------------------------------------------------------------


def save_operator(op, path) -> None:
    """Write a dense matrix (differential operators are densified first)."""
    if isinstance(op, (PolarDiffOperator, CartesianDiffOperator)):
        op = op.to_dense()
    if not isinstance(op, DenseOperator):
        raise TypeError(f"cannot serialize {type(op).__name__}")
    np.ascontiguousarray(op.matrix).tofile(path)
    _write_meta(path, {"kind": "operator", "grid": grid_meta(op.grid),
                       "shape": list(op.matrix.shape)})


def load_operator(path) -> DenseOperator:
    meta = _read_meta(path, "operator")
    grid = grid_from_meta(meta["grid"])
    rows, cols = (int(x) for x in meta["shape"])
    data = _read_array(path, rows * cols)
    return DenseOperator(grid, data.reshape(rows, cols))


# operator fields -------------------------------------------------------------


def save_field(A: OperatorField, path) -> None:
    np.ascontiguousarray(A.fibers).tofile(path)
    _write_meta(path, {"kind": "field", **A.grid.meta(),
                       "rows": [int(r) for r in A.rows]})


def load_field(path) -> OperatorField:
    meta = _read_meta(path, "field")
    grid = grid_from_meta({"type": "polar", **meta})
    rows = np.asarray(meta["rows"], dtype=int)
    data = _read_array(path, len(rows) * grid.M * grid.M)
    return OperatorField(grid, data.reshape(len(rows), grid.M, grid.M), rows)
