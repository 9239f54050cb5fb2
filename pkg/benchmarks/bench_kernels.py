"""Compare the compiled and numpy grid kernels on a K=2 oracle search.

    python3 benchmarks/bench_kernels.py [--resolution 64] [--repeat 3]
"""

import argparse
import time

import numpy as np

from wpbc import _kernels_py, kernels, oracle
from wpbc.channel import Geometry, sample_channels
from wpbc.model import NetworkInstance


def _timed(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--resolution", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    ch = sample_channels(Geometry.midpoint(25.0, 2), args.seed)
    inst = NetworkInstance.build(ch.h, ch.g, 24000.0, 200e-6)
    if kernels.BACKEND != "cython":
        print("compiled kernels not built; only the numpy fallback is timed")
    rows = []
    for mode in ("dynamic", "static"):
        for name in ("numpy", "cython"):
            if name == "cython" and kernels.BACKEND != "cython":
                continue
            src = _kernels_py if name == "numpy" else kernels._kernels
            saved = kernels.dynamic_kernel, kernels.static_kernel
            kernels.dynamic_kernel, kernels.static_kernel = src.dynamic_kernel, src.static_kernel
            try:
                dt, res = _timed(lambda: oracle.grid_search(inst, args.resolution, mode), args.repeat)
            finally:
                kernels.dynamic_kernel, kernels.static_kernel = saved
            rows.append((mode, name, dt, res.energy, res.evaluations))
    print(f"{'mode':8s} {'backend':7s} {'seconds':>9s} {'energy_j':>14s} {'points':>10s}")
    for mode, name, dt, e, n in rows:
        print(f"{mode:8s} {name:7s} {dt:9.4f} {e:14.9f} {n:10d}")
    for mode in ("dynamic", "static"):
        t = {name: dt for m, name, dt, _, _ in rows if m == mode}
        if "cython" in t:
            print(f"{mode}: speedup x{t['numpy'] / t['cython']:.1f}")


if __name__ == "__main__":
    main()
