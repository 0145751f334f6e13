"""Compare the numba and numpy implementations of the hot kernels.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both implementations are imported side by side from ``opfield._kernels``;
the numba entries are empty when numba is unavailable or disabled with
``OPFIELD_NUMBA=0``.  Each case first checks that the two agree.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from opfield import _kernels
from opfield.grids import FD1


def _cases(rng: np.random.Generator):
    S = M = 64
    f = rng.normal(size=(12, S, M)) + 1j * rng.normal(size=(12, S, M))
    coeffs = FD1 * 16.0
    yield "stencil_axis (12x64x64)", "stencil_axis", (f, coeffs), None

    vals = rng.normal(size=(S, M)) + 1j * rng.normal(size=(S, M))
    u0 = rng.uniform(-2, S + 1, size=64 * 64)
    u1 = rng.uniform(0, M, size=64 * 64)
    yield "cubic_interp2 (4096 points)", "cubic_interp2", (vals, u0, u1, True), None

    N = 256
    G = rng.normal(size=(2 * N - 1, N)) + 1j * rng.normal(size=(2 * N - 1, N))
    yield "scatter_kernel_1d (N=256)", "scatter_kernel_1d", (G,), None

    N = 32
    Gs = rng.normal(size=(2 * N - 1, N, N)) + 1j * rng.normal(size=(2 * N - 1, N, N))
    K4 = np.zeros((N, N, N, N), dtype=np.complex128)  # reused; only one diagonal is written

    def make_args():
        return (Gs, K4, N - 1)

    yield "scatter_kernel_2d (N=32, one diagonal)", "scatter_kernel_2d", None, make_args


def _run(fn, args, make_args, keep: bool = False):
    if make_args is not None:
        a = make_args()
        fn(*a)
        return a[1].copy() if keep else None
    return fn(*args)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    opts = ap.parse_args()
    rng = np.random.default_rng(0)
    have_numba = bool(_kernels.numba_impl)
    print(f"active backend: {_kernels.BACKEND}")
    print(f"{'kernel':42s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s}")
    for label, key, args, make_args in _cases(rng):
        np_fn = _kernels.numpy_impl[key]
        ref = _run(np_fn, args, make_args, keep=True)
        t_np = min(timeit.repeat(lambda: _run(np_fn, args, make_args),
                                 number=1, repeat=opts.repeat)) * 1e3
        if have_numba:
            nb_fn = _kernels.numba_impl[key]
            got = _run(nb_fn, args, make_args, keep=True)  # also triggers compilation
            err = float(np.max(np.abs(got - ref)))
            if err > 1e-12:
                raise SystemExit(f"{key}: backends disagree by {err:.2e}")
            t_nb = min(timeit.repeat(lambda: _run(nb_fn, args, make_args),
                                     number=1, repeat=opts.repeat)) * 1e3
            print(f"{label:42s} {t_np:11.3f} {t_nb:11.3f} {t_np / t_nb:7.1f}x")
        else:
            print(f"{label:42s} {t_np:11.3f} {'-':>11s} {'-':>8s}")


if __name__ == "__main__":
    main()
