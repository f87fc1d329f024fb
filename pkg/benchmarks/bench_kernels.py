"""Compare the numba kernels with their pure-numpy twins.

    python benchmarks/bench_kernels.py [--repeat 20]

Both paths are timed in the same process by calling the kernels directly,
so the result does not depend on ``CGSBP_DISABLE_NUMBA``.
"""

import argparse
import time

import numpy as np

from cgsbp import _kernels
from cgsbp.mesh import build_mesh
from cgsbp.sbp import build_sbp


def best_of(fn, repeat):
    fn()  # warm-up (triggers compilation)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_scatter(n_e, p, repeat):
    blocks = np.broadcast_to(build_sbp(p).Qx, (n_e, p + 1, p + 1)).copy()
    n = n_e * p + 1

    def run(kernel):
        return lambda: kernel(np.zeros((2 * p + 1, n)), blocks, p, p)

    out = {"numpy": best_of(run(_kernels.scatter_blocks_numpy), repeat)}
    if _kernels.HAVE_NUMBA:
        a = _kernels.scatter_blocks_numba(np.zeros((2 * p + 1, n)), blocks, p, p)
        b = _kernels.scatter_blocks_numpy(np.zeros((2 * p + 1, n)), blocks, p, p)
        assert np.allclose(a, b, rtol=0, atol=1e-14)
        out["numba"] = best_of(run(_kernels.scatter_blocks_numba), repeat)
    return out


def bench_weno(n, repeat):
    x = np.linspace(-0.02, 1.02, n + 4)
    v = np.where(x <= 0.6, np.exp(-100 * (x - 0.2) ** 2), 0.5)
    f, df = v.copy(), np.ones_like(v)
    out = {"numpy": best_of(lambda: _kernels.weno3_fluxes_numpy(v, f, df), repeat)}
    if _kernels.HAVE_NUMBA:
        assert np.allclose(_kernels.weno3_fluxes_numba(v, f, df, _kernels.WENO_EPS), _kernels.weno3_fluxes_numpy(v, f, df), rtol=1e-13, atol=1e-15)
        out["numba"] = best_of(lambda: _kernels.weno3_fluxes_numba(v, f, df, _kernels.WENO_EPS), repeat)
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    print(f"numba available: {_kernels.HAVE_NUMBA}")
    print(f"{'kernel':<28}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    cases = [(f"scatter p=4, {n_e} elements", lambda n_e=n_e: bench_scatter(n_e, 4, args.repeat)) for n_e in (20, 200, 2000)]
    cases += [(f"weno3 fluxes, {n} nodes", lambda n=n: bench_weno(n, args.repeat)) for n in (80, 800, 8000)]
    for name, fn in cases:
        r = fn()
        nb = r.get("numba")
        speed = f"{r['numpy'] / nb:9.1f}x" if nb else "      n/a"
        nb_txt = f"{nb * 1e3:12.4f}" if nb else f"{'-':>12}"
        print(f"{name:<28}{r['numpy'] * 1e3:12.4f}{nb_txt}{speed:>10}")

    # end-to-end: global assembly through the public path
    mesh = build_mesh(0, 1, 2000, 4)
    from cgsbp.mesh import assemble

    t = best_of(lambda: assemble(mesh, mesh.ops.Qx), args.repeat)
    print(f"assemble Qx (2000 P4 elements, {_kernels.backend()}): {t * 1e3:.3f} ms")


if __name__ == "__main__":
    main()
