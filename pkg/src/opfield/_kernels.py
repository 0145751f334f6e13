"""Hot loops with a numba path and a pure-numpy fallback.

The numpy fallback is selected by setting ``OPFIELD_NUMBA=0`` before import,
or automatically when numba is unavailable.  ``OPFIELD_THREADS`` caps the
number of numba worker threads.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "BACKEND",
    "stencil_axis",
    "cubic_interp2",
    "scatter_kernel_1d",
    "scatter_kernel_2d",
    "numpy_impl",
    "numba_impl",
]


def _want_numba() -> bool:
    flag = os.environ.get("OPFIELD_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "no", "off")


# ---------------------------------------------------------------------------
# numpy implementations (always available, also the reference in tests)
# ---------------------------------------------------------------------------


def _np_stencil_axis(f: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    # f has shape (B, S, M); centered stencil along axis 1, zero padding
    half = (len(coeffs) - 1) // 2
    S = f.shape[1]
    out = np.zeros_like(f)
    for o, c in zip(range(-half, half + 1), coeffs):
        if c == 0.0:
            continue
        lo, hi = max(0, -o), min(S, S - o)
        out[:, lo:hi, :] += c * f[:, lo + o:hi + o, :]
    return out


def _keys(t: np.ndarray) -> np.ndarray:
    # Keys cubic convolution weights (a = -1/2) for offsets t-1, t, 1-t, 2-t
    t2 = t * t
    t3 = t2 * t
    w0 = -0.5 * t3 + t2 - 0.5 * t
    w1 = 1.5 * t3 - 2.5 * t2 + 1.0
    w2 = -1.5 * t3 + 2.0 * t2 + 0.5 * t
    w3 = 0.5 * t3 - 0.5 * t2
    return np.stack([w0, w1, w2, w3])


def _np_cubic_interp2(values: np.ndarray, u0: np.ndarray, u1: np.ndarray,
                      periodic1: bool) -> np.ndarray:
    n0, n1 = values.shape
    i0 = np.floor(u0).astype(np.int64)
    i1 = np.floor(u1).astype(np.int64)
    w0 = _keys(u0 - i0)
    w1 = _keys(u1 - i1)
    out = np.zeros(u0.shape, dtype=np.complex128)
    for a in range(4):
        r = i0 - 1 + a
        ok0 = (r >= 0) & (r < n0)
        rc = np.clip(r, 0, n0 - 1)
        for b in range(4):
            c = i1 - 1 + b
            if periodic1:
                ok = ok0
                cc = np.mod(c, n1)
            else:
                ok = ok0 & (c >= 0) & (c < n1)
                cc = np.clip(c, 0, n1 - 1)
            out += np.where(ok, w0[a] * w1[b] * values[rc, cc], 0.0)
    return out


def _np_scatter_kernel_1d(G: np.ndarray) -> np.ndarray:
    N = G.shape[1]
    j = np.arange(N)[:, None]
    k = np.arange(N)[None, :]
    return G[j + k, (j - k) % N]


def _np_scatter_kernel_2d(Gs: np.ndarray, K4: np.ndarray, sigma1: int) -> None:
    # Gs[sigma2, d1, d2] for fixed sigma1; fills K4[j1, :, k1, :] in place
    N = K4.shape[0]
    j2 = np.arange(N)[:, None]
    k2 = np.arange(N)[None, :]
    sig2 = j2 + k2
    d2 = (j2 - k2) % N
    for j1 in range(max(0, sigma1 - N + 1), min(N, sigma1 + 1)):
        k1 = sigma1 - j1
        K4[j1, :, k1, :] = Gs[sig2, (j1 - k1) % N, d2]


numpy_impl = {
    "stencil_axis": _np_stencil_axis,
    "cubic_interp2": _np_cubic_interp2,
    "scatter_kernel_1d": _np_scatter_kernel_1d,
    "scatter_kernel_2d": _np_scatter_kernel_2d,
}
numba_impl: dict = {}

# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

try:
    if not _want_numba():
        raise ImportError("numba disabled by OPFIELD_NUMBA")
    import numba
    from numba import njit, prange

    # prefer OpenMP/workqueue; an outdated TBB only produces a warning
    if "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
    _threads = os.environ.get("OPFIELD_THREADS", "").strip()
    if _threads.isdigit():
        numba.set_num_threads(max(1, min(int(_threads), numba.config.NUMBA_NUM_THREADS)))

    @njit(cache=True)
    def _nb_stencil_axis_impl(f, coeffs, out):
        B, S, M = f.shape
        half = (coeffs.shape[0] - 1) // 2
        for b in range(B):
            for i in range(S):
                for o in range(-half, half + 1):
                    c = coeffs[o + half]
                    if c == 0.0:
                        continue
                    r = i + o
                    if r < 0 or r >= S:
                        continue
                    for j in range(M):
                        out[b, i, j] += c * f[b, r, j]

    def _nb_stencil_axis(f, coeffs):
        out = np.zeros_like(f)
        _nb_stencil_axis_impl(np.ascontiguousarray(f), np.asarray(coeffs, dtype=np.float64), out)
        return out

    @njit(cache=True, inline="always")
    def _keys_w(t, w):
        t2 = t * t
        t3 = t2 * t
        w[0] = -0.5 * t3 + t2 - 0.5 * t
        w[1] = 1.5 * t3 - 2.5 * t2 + 1.0
        w[2] = -1.5 * t3 + 2.0 * t2 + 0.5 * t
        w[3] = 0.5 * t3 - 0.5 * t2

    @njit(cache=True, parallel=True)
    def _nb_cubic_interp2_impl(values, u0, u1, periodic1, out):
        n0, n1 = values.shape
        P = u0.shape[0]
        for p in prange(P):
            i0 = int(np.floor(u0[p]))
            i1 = int(np.floor(u1[p]))
            w0 = np.empty(4)
            w1 = np.empty(4)
            _keys_w(u0[p] - i0, w0)
            _keys_w(u1[p] - i1, w1)
            acc = 0.0 + 0.0j
            for a in range(4):
                r = i0 - 1 + a
                if r < 0 or r >= n0:
                    continue
                for b in range(4):
                    c = i1 - 1 + b
                    if periodic1:
                        c = c % n1
                    elif c < 0 or c >= n1:
                        continue
                    acc += w0[a] * w1[b] * values[r, c]
            out[p] = acc

    def _nb_cubic_interp2(values, u0, u1, periodic1):
        shape = np.shape(u0)
        a0 = np.ascontiguousarray(np.ravel(u0), dtype=np.float64)
        a1 = np.ascontiguousarray(np.ravel(u1), dtype=np.float64)
        out = np.empty(a0.shape[0], dtype=np.complex128)
        _nb_cubic_interp2_impl(np.ascontiguousarray(values, dtype=np.complex128),
                               a0, a1, bool(periodic1), out)
        return out.reshape(shape)

    @njit(cache=True)
    def _nb_scatter_kernel_1d(G):
        N = G.shape[1]
        K = np.empty((N, N), dtype=G.dtype)
        for j in range(N):
            for k in range(N):
                K[j, k] = G[j + k, (j - k) % N]
        return K

    @njit(cache=True, parallel=True)
    def _nb_scatter_kernel_2d(Gs, K4, sigma1):
        N = K4.shape[0]
        lo = max(0, sigma1 - N + 1)
        hi = min(N, sigma1 + 1)
        for j1 in prange(lo, hi):
            k1 = sigma1 - j1
            d1 = (j1 - k1) % N
            for j2 in range(N):
                for k2 in range(N):
                    K4[j1, j2, k1, k2] = Gs[j2 + k2, d1, (j2 - k2) % N]

    numba_impl = {
        "stencil_axis": _nb_stencil_axis,
        "cubic_interp2": _nb_cubic_interp2,
        "scatter_kernel_1d": _nb_scatter_kernel_1d,
        "scatter_kernel_2d": _nb_scatter_kernel_2d,
    }
    BACKEND = "numba"
except ImportError:
    BACKEND = "numpy"

_impl = numba_impl if BACKEND == "numba" else numpy_impl

stencil_axis = _impl["stencil_axis"]
cubic_interp2 = _impl["cubic_interp2"]
scatter_kernel_1d = _impl["scatter_kernel_1d"]
scatter_kernel_2d = _impl["scatter_kernel_2d"]
