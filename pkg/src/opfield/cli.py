"""Command-line entry point: verification suites, quantization and fiber extraction.

Commands::

    opfield verify --suite <name> [--config PATH] [--out PATH] [--format json|csv]
                   [--seed N] [--grid S=..,M=..,N=..]
    opfield quantize --symbol FILE --backend kernel|diffop --out PATH
    opfield fibers --operator PATH --out PATH

Config files are flat ``key = value`` text; ``#`` starts a comment.  Every key
has a default (see :class:`RunConfig`), so ``verify --suite all`` needs no file.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io as _io
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence

from . import __version__
from . import io as oio
from .grids import CartesianGrid, PolarGrid
from .op_field import LEAKAGE_TOL, extract_fibers
from .suites import SUITES, run_checks, suite_names
from .weyl import quantize_diffop, quantize_kernel

__all__ = [
    "ConfigError",
    "ReportError",
    "RunConfig",
    "CheckRecord",
    "run_suite",
    "emit_report",
    "parse_report",
    "main",
]

log = logging.getLogger("opfield")

RECORD_FIELDS = ("suite", "check", "anchor", "status", "metric", "tol", "ms")
REPORT_VERSION = 1


class ConfigError(ValueError):
    """Invalid configuration value, key or suite name."""


class ReportError(OSError):
    """The report could not be written or parsed."""


@dataclass(frozen=True)
class RunConfig:
    """Grid parameters, tolerances and run options.

    ``N`` is the Cartesian grid size; ``L`` the 1-D box half-width and
    ``cart_L2`` the 2-D box half-width used for resampling comparisons.
    """

    n: int = 2
    S: int = 64
    M: int = 64
    s_min: float = -2.0
    s_max: float = 2.0
    N: int = 64
    L: float = 8.0
    cart_L2: float = 2.9
    tol_exact: float = 1e-8
    tol_stencil: float = 1e-6
    tol_cross: float = 1e-3
    suite: str = "all"
    seed: int = 0
    out: str | None = None
    format: str = "json"
    record_timing: bool = False

    def __post_init__(self):
        if self.n != 2:
            raise ConfigError("the polar grid and batteries are defined for n = 2 only")
        for name in ("S", "M", "N"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.S < 20 or self.M < 8:
            raise ConfigError("need S >= 20 (stencil collars) and M >= 8")
        if not self.s_min < self.s_max:
            raise ConfigError("need s_min < s_max")
        if self.L <= 0 or self.cart_L2 <= 0:
            raise ConfigError("box half-widths must be positive")
        for name in ("tol_exact", "tol_stencil", "tol_cross"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.suite not in suite_names():
            raise ConfigError(f"unknown suite {self.suite!r}; choose from {', '.join(suite_names())}")
        if self.format not in ("json", "csv"):
            raise ConfigError(f"unknown format {self.format!r}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    # -- construction ----------------------------------------------------------
    @classmethod
    def _coerce(cls, key: str, text: str):
        types = {f.name: f.type for f in fields(cls)}
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        t = types[key]
        text = text.strip()
        try:
            if t == "int":
                return int(text, 0)
            if t == "float":
                return float(text)
            if t == "bool":
                low = text.lower()
                if low not in ("1", "0", "true", "false", "yes", "no"):
                    raise ValueError(text)
                return low in ("1", "true", "yes")
            if t == "str | None":
                return None if text.lower() in ("", "none") else text
            return text
        except ValueError:
            raise ConfigError(f"bad value for {key}: {text!r}") from None

    @classmethod
    def parse_text(cls, text: str) -> dict:
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value")
            key, val = (x.strip() for x in line.split("=", 1))
            values[key] = cls._coerce(key, val)
        return values

    @classmethod
    def from_file(cls, path, **overrides) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        values = cls.parse_text(text)
        values.update(overrides)
        return cls(**values)

    def with_grid(self, spec: str) -> "RunConfig":
        """Apply a ``S=..,M=..,N=..`` override string."""
        values = {}
        for part in spec.split(","):
            if not part.strip():
                continue
            if "=" not in part:
                raise ConfigError(f"bad grid override {part!r}")
            key, val = (x.strip() for x in part.split("=", 1))
            values[key] = self._coerce(key, val)
        return dataclasses.replace(self, **values)

    def header(self) -> dict:
        """Config values that determine the results (excludes output options)."""
        skip = {"out", "format", "record_timing"}
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name not in skip}


@dataclass(frozen=True)
class CheckRecord:
    """One verification outcome; ``tol`` is None for info records."""

    suite: str
    check: str
    anchor: str
    status: str
    metric: float
    tol: float | None
    ms: int = 0

    def __post_init__(self):
        if self.status not in ("pass", "fail", "info"):
            raise ValueError(f"bad status {self.status!r}")
        if (self.status == "info") != (self.tol is None):
            raise ValueError("info records carry no tolerance and vice versa")
        if self.tol is not None and (self.status == "pass") != (self.metric <= self.tol):
            raise ValueError("status must be pass iff metric <= tol")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in RECORD_FIELDS}


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("OPFIELD_THREADS", "1")))
    except ValueError:
        return 1


def _run_one(name: str, config: RunConfig) -> list[CheckRecord]:
    out = []
    t0 = time.perf_counter()
    for check, outcomes in run_checks(name, config):
        t1 = time.perf_counter()
        ms = int(round((t1 - t0) * 1000)) if config.record_timing else 0
        t0 = t1
        log.info("%s: %s done", name, check.__name__.lstrip("_"))
        for o in outcomes:
            if o.tol is None:
                status = "info"
            else:
                status = "pass" if o.metric <= o.tol else "fail"
            out.append(CheckRecord(name, o.check, o.anchor, status, float(o.metric),
                                   None if o.tol is None else float(o.tol), ms))
    return out


def run_suite(name: str, config: RunConfig | None = None) -> list[CheckRecord]:
    """Run a named suite (or ``all``) and return its records sorted by suite and check."""
    config = config or RunConfig()
    if name not in suite_names():
        raise ConfigError(f"unknown suite {name!r}; choose from {', '.join(suite_names())}")
    names = list(SUITES) if name == "all" else [name]
    workers = min(_threads(), len(names))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda s: _run_one(s, config), names))
    else:
        parts = [_run_one(s, config) for s in names]
    records = [r for part in parts for r in part]
    return sorted(records, key=lambda r: (r.suite, r.check))


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def _summary(records: Sequence[CheckRecord]) -> dict:
    counts = {"pass": 0, "fail": 0, "info": 0}
    for r in records:
        counts[r.status] += 1
    return {"kind": "summary", **counts, "total": len(records)}


def _render(records: Sequence[CheckRecord], fmt: str, header: dict | None) -> str:
    summary = _summary(records)
    if fmt == "json":
        lines = [json.dumps({"kind": "header", "version": REPORT_VERSION,
                             "fields": list(RECORD_FIELDS), "config": header or {}},
                            sort_keys=False)]
        lines += [json.dumps(r.to_dict()) for r in records]
        lines.append(json.dumps(summary))
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        buf = _io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(RECORD_FIELDS)
        for r in records:
            d = r.to_dict()
            d["metric"] = repr(d["metric"])
            d["tol"] = "" if d["tol"] is None else repr(d["tol"])
            w.writerow([d[k] for k in RECORD_FIELDS])
        w.writerow([f"# summary pass={summary['pass']} fail={summary['fail']} "
                    f"info={summary['info']} total={summary['total']}"])
        return buf.getvalue()
    raise ConfigError(f"unknown format {fmt!r}")


def emit_report(records: Sequence[CheckRecord], path, fmt: str = "json",
                header: dict | None = None) -> None:
    """Write records as JSON lines or CSV with a summary footer.

    ``path`` of ``"-"`` or None writes to standard output.
    """
    text = _render(records, fmt, header)
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise ReportError(f"cannot write report {path}: {exc}") from None


def parse_report(source) -> tuple[list[CheckRecord], dict]:
    """Parse an emitted report (path or text); returns records and summary."""
    text = source
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ReportError(f"cannot read report {source}: {exc}") from None
    records: list[CheckRecord] = []
    summary: dict = {}
    first = text.lstrip()[:1]
    if first == "{":
        for line in text.splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            kind = obj.get("kind")
            if kind == "summary":
                summary = obj
            elif kind != "header":
                records.append(CheckRecord(**{k: obj[k] for k in RECORD_FIELDS}))
        return records, summary
    rows = list(csv.reader(_io.StringIO(text)))
    if not rows or tuple(rows[0]) != RECORD_FIELDS:
        raise ReportError("not an opfield report")
    for row in rows[1:]:
        if len(row) == 1 and row[0].startswith("# summary"):
            parts = dict(p.split("=") for p in row[0].split()[2:])
            summary = {"kind": "summary", **{k: int(v) for k, v in parts.items()}}
            continue
        d = dict(zip(RECORD_FIELDS, row))
        records.append(CheckRecord(d["suite"], d["check"], d["anchor"], d["status"],
                                   float(d["metric"]), None if d["tol"] == "" else float(d["tol"]),
                                   int(d["ms"])))
    return records, summary


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _config_from_args(args, **extra) -> RunConfig:
    overrides = {k: v for k, v in extra.items() if v is not None}
    if getattr(args, "config", None):
        cfg = RunConfig.from_file(args.config, **overrides)
    else:
        cfg = RunConfig(**overrides)
    if getattr(args, "grid", None):
        cfg = cfg.with_grid(args.grid)
    return cfg


def _cmd_verify(args) -> int:
    cfg = _config_from_args(args, suite=args.suite, seed=args.seed, out=args.out,
                            format=args.format)
    records = run_suite(cfg.suite, cfg)
    emit_report(records, cfg.out, cfg.format, header=cfg.header())
    s = _summary(records)
    if cfg.out not in (None, "-"):
        for r in records:
            tol = "-" if r.tol is None else f"{r.tol:.0e}"
            print(f"{r.status.upper():4s}  {r.suite}/{r.check}  metric={r.metric:.3e}  tol={tol}")
        print(f"{s['pass']} passed, {s['fail']} failed, {s['info']} info")
    return 1 if s["fail"] else 0


def _cmd_quantize(args) -> int:
    cfg = _config_from_args(args)
    u = oio.load_symbol(args.symbol)
    if u.n not in (1, 2):
        raise ConfigError("symbols must have n = 1 or 2")
    if args.backend == "kernel":
        grid = CartesianGrid(u.n, cfg.N, cfg.L if u.n == 1 else cfg.cart_L2)
        op = quantize_kernel(u, grid)
    else:
        grid = (CartesianGrid(1, cfg.N, cfg.L) if u.n == 1 else
                PolarGrid(S=cfg.S, M=cfg.M, s_min=cfg.s_min, s_max=cfg.s_max, n=2))
        op = quantize_diffop(u, grid)
    oio.save_operator(op, args.out)
    print(f"wrote {args.out} ({args.backend}, {type(grid).__name__})")
    return 0


def _cmd_fibers(args) -> int:
    op = oio.load_operator(args.operator)
    if not isinstance(op.grid, PolarGrid):
        raise ConfigError("fiber extraction needs an operator on the polar grid")
    field, leak = extract_fibers(op)
    oio.save_field(field, args.out)
    print(f"wrote {args.out}; leakage {leak:.3e}")
    if leak > LEAKAGE_TOL:
        print(f"warning: leakage exceeds {LEAKAGE_TOL:.0e}; the operator is not decomposable",
              file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="opfield", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("--suite", default=None, help=f"one of {', '.join(suite_names())}")
    v.add_argument("--config", help="key=value config file")
    v.add_argument("--out", help="report path (default: stdout)")
    v.add_argument("--format", choices=("json", "csv"), default=None)
    v.add_argument("--seed", type=int, default=None)
    v.add_argument("--grid", help="grid overrides, e.g. S=64,M=64,N=64")
    v.set_defaults(func=_cmd_verify)

    q = sub.add_parser("quantize", help="quantize a symbol file to a dense operator")
    q.add_argument("--symbol", required=True)
    q.add_argument("--backend", choices=("kernel", "diffop"), required=True)
    q.add_argument("--out", required=True)
    q.add_argument("--config")
    q.add_argument("--grid")
    q.set_defaults(func=_cmd_quantize)

    f = sub.add_parser("fibers", help="extract the fiber field of a polar-grid operator")
    f.add_argument("--operator", required=True)
    f.add_argument("--out", required=True)
    f.set_defaults(func=_cmd_fibers)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    """Run the CLI; returns the process exit code (0 iff no thresholded check fails)."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, oio.FormatError, ReportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
