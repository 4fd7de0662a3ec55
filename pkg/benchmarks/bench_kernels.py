"""Benchmark the numba and pure-numpy B-spline jet kernels.

Run: python benchmarks/bench_kernels.py --points 20000 --repeats 20

The same batch of parameter points is evaluated by both backends; the
numba path is warmed up first so JIT compilation is not timed. A second
section times the full batched closest-point projection, which is the
optimizer's per-iteration hot loop.
"""

import argparse
import time

import numpy as np

from lnets import convex_paraboloid_patch, project_points
from lnets.kernels import (HAS_NUMBA, surface_jets_batch_numba,
                           surface_jets_batch_numpy)


def time_fn(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1e3


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--points", type=int, default=20000)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    surf = convex_paraboloid_patch()
    rng = np.random.default_rng(0)
    us = rng.uniform(0.0, 1.0, args.points)
    vs = rng.uniform(0.0, 1.0, args.points)
    call = (surf.knots_u, surf.knots_v, surf.degree_u, surf.degree_v,
            surf.control_grid, us, vs)

    t_np = time_fn(lambda: surface_jets_batch_numpy(*call), args.repeats)
    print(f"jets  numpy : {t_np:8.2f} ms  ({args.points} points)")
    if HAS_NUMBA:
        surface_jets_batch_numba(*call)  # warm up the JIT
        t_nb = time_fn(lambda: surface_jets_batch_numba(*call), args.repeats)
        print(f"jets  numba : {t_nb:8.2f} ms")
        print(f"speedup     : {t_np / t_nb:8.2f}x")
        a = surface_jets_batch_numpy(*call)
        b = surface_jets_batch_numba(*call)
        print(f"max |diff|  : {np.max(np.abs(a - b)):.3e}")
    else:
        print("numba not available; numpy path only")

    queries = rng.uniform(-0.5, 0.5, size=(2000, 3))
    queries[:, 2] += 0.5
    t_proj = time_fn(lambda: project_points(surf, queries),
                     max(3, args.repeats // 5))
    print(f"projection  : {t_proj:8.2f} ms  (2000 queries, grid-seeded)")


if __name__ == "__main__":
    main()
