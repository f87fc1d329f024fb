"""Hot inner loops, compiled with numba when available.

Every kernel has a pure-numpy twin with identical semantics. The compiled
path is used by default; set ``CGSBP_DISABLE_NUMBA=1`` to force the numpy
path (handy for debugging, profiling and platforms without numba). Arrays
whose dtype is not float64 (e.g. ``np.longdouble`` used by the extended
precision steady solver) always take the numpy path.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("CGSBP_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("numba disabled by CGSBP_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

WENO_EPS = 1.0e-6


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


# {{{ element scatter into banded storage


def scatter_blocks_numpy(ab, blocks, p, bw):
    n_e = blocks.shape[0]
    loc = np.arange(p + 1)
    rows = (np.arange(n_e)[:, None, None] * p + loc[None, :, None]) + np.zeros((1, 1, p + 1), dtype=int)
    cols = (np.arange(n_e)[:, None, None] * p + loc[None, None, :]) + np.zeros((1, p + 1, 1), dtype=int)
    np.add.at(ab, (bw + rows - cols, cols), blocks)
    return ab


def _scatter_blocks_py(ab, blocks, p, bw):
    n_e = blocks.shape[0]
    for e in range(n_e):
        base = e * p
        for a in range(p + 1):
            i = base + a
            for b in range(p + 1):
                j = base + b
                ab[bw + i - j, j] += blocks[e, a, b]
    return ab


# }}}


# {{{ WENO3 interface fluxes


def weno3_fluxes_numpy(v, f, df, eps=WENO_EPS):
    """Interface fluxes for a padded state ``v`` (two ghosts per side).

    ``f`` and ``df`` are the flux and ``|f'|`` at the padded points. Returns
    the ``len(v) - 3`` numerical fluxes at the faces between consecutive
    padded points ``1..len(v)-2``.
    """
    # local Lax-Friedrichs speed over the 4-point stencil of each face
    alpha = np.maximum(np.maximum(df[:-3], df[1:-2]), np.maximum(df[2:-1], df[3:]))

    # f+ from (i-1, i, i+1)
    a0 = 0.5 * (f[:-3] + alpha * v[:-3])
    a1 = 0.5 * (f[1:-2] + alpha * v[1:-2])
    a2 = 0.5 * (f[2:-1] + alpha * v[2:-1])
    w0 = (1.0 / 3.0) / (eps + (a1 - a0) ** 2) ** 2
    w1 = (2.0 / 3.0) / (eps + (a2 - a1) ** 2) ** 2
    fp = (w0 * (1.5 * a1 - 0.5 * a0) + w1 * 0.5 * (a1 + a2)) / (w0 + w1)

    # f- from (i, i+1, i+2), mirrored
    c0 = 0.5 * (f[1:-2] - alpha * v[1:-2])
    c1 = 0.5 * (f[2:-1] - alpha * v[2:-1])
    c2 = 0.5 * (f[3:] - alpha * v[3:])
    v0 = (1.0 / 3.0) / (eps + (c1 - c2) ** 2) ** 2
    v1 = (2.0 / 3.0) / (eps + (c0 - c1) ** 2) ** 2
    fm = (v0 * (1.5 * c1 - 0.5 * c2) + v1 * 0.5 * (c0 + c1)) / (v0 + v1)

    return fp + fm


def _weno3_fluxes_py(v, f, df, eps=WENO_EPS):
    m = v.shape[0] - 3
    out = np.empty(m)
    for k in range(m):
        alpha = max(max(df[k], df[k + 1]), max(df[k + 2], df[k + 3]))

        a0 = 0.5 * (f[k] + alpha * v[k])
        a1 = 0.5 * (f[k + 1] + alpha * v[k + 1])
        a2 = 0.5 * (f[k + 2] + alpha * v[k + 2])
        b0 = a1 - a0
        b1 = a2 - a1
        w0 = (1.0 / 3.0) / ((eps + b0 * b0) * (eps + b0 * b0))
        w1 = (2.0 / 3.0) / ((eps + b1 * b1) * (eps + b1 * b1))
        fp = (w0 * (1.5 * a1 - 0.5 * a0) + w1 * 0.5 * (a1 + a2)) / (w0 + w1)

        c0 = 0.5 * (f[k + 1] - alpha * v[k + 1])
        c1 = 0.5 * (f[k + 2] - alpha * v[k + 2])
        c2 = 0.5 * (f[k + 3] - alpha * v[k + 3])
        d0 = c1 - c2
        d1 = c0 - c1
        v0 = (1.0 / 3.0) / ((eps + d0 * d0) * (eps + d0 * d0))
        v1 = (2.0 / 3.0) / ((eps + d1 * d1) * (eps + d1 * d1))
        fm = (v0 * (1.5 * c1 - 0.5 * c2) + v1 * 0.5 * (c0 + c1)) / (v0 + v1)

        out[k] = fp + fm
    return out


# }}}


if HAVE_NUMBA:
    scatter_blocks_numba = njit(cache=True)(_scatter_blocks_py)
    weno3_fluxes_numba = njit(cache=True)(_weno3_fluxes_py)
else:
    scatter_blocks_numba = None
    weno3_fluxes_numba = None


def scatter_blocks(ab, blocks, p, bw):
    """Add element blocks ``(n_e, p+1, p+1)`` into LAPACK-style banded ``ab``."""
    if HAVE_NUMBA and ab.dtype == np.float64 and blocks.dtype == np.float64:
        return scatter_blocks_numba(ab, np.ascontiguousarray(blocks), p, bw)
    return scatter_blocks_numpy(ab, blocks, p, bw)


def weno3_fluxes(v, f, df, eps=WENO_EPS):
    if HAVE_NUMBA:
        return weno3_fluxes_numba(
            np.ascontiguousarray(v, dtype=np.float64),
            np.ascontiguousarray(f, dtype=np.float64),
            np.ascontiguousarray(df, dtype=np.float64),
            eps,
        )
    return weno3_fluxes_numpy(v, f, df, eps)
