#!/usr/bin/env python3
"""Side-by-side timing of the numba kernels against the numpy fallbacks.

Run as a script. The table reports warm timings (first numba call pays
JIT compilation and is shown separately).
"""

import time

import numpy as np

from reachkit import _kernels
from reachkit._accel import HAVE_NUMBA, backend_name
from reachkit.dynamics import Bounds
from reachkit.grid import Grid3
from reachkit.levelset import sdf_obstacles, sdf_target


def bench(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    grid = Grid3()
    b = Bounds()
    ell = sdf_target(grid, 1.0).data
    g = sdf_obstacles(grid, []).data
    V0 = np.maximum(ell, g)
    hx, hy, hth = grid.spacing
    cos_t = np.cos(grid.axis(2))
    sin_t = np.sin(grid.axis(2))
    lf_args = (V0, ell, g, 160, 0.05, hx, hy, hth, cos_t, sin_t,
               b.v_min, b.v_max, b.omega_max, b.d_bar, b.d_theta_bar)

    rng = np.random.default_rng(0)
    n = 200_000
    pts = (rng.uniform(-9.9, 9.9, n), rng.uniform(-9.9, 9.9, n),
           rng.uniform(-np.pi, np.pi, n))
    tri_args = (V0, *pts, grid.bounds[0][0], hx, grid.bounds[1][0], hy,
                grid.bounds[2][0], hth)

    print(f"active backend: {backend_name()}  (numba available: {HAVE_NUMBA})")
    print(f"{'kernel':<28} {'numpy':>10} {'numba':>10} {'speedup':>9}")
    rows = [
        ("lf_advance (160 steps, 50^2x25)", _kernels.lf_advance_numpy,
         getattr(_kernels, "lf_advance_numba", None), lf_args),
        ("trilinear (200k points)", _kernels.trilinear_numpy,
         getattr(_kernels, "trilinear_numba", None), tri_args),
    ]
    for name, np_fn, nb_fn, args in rows:
        t_np = bench(np_fn, *args, repeat=3)
        if nb_fn is None:
            print(f"{name:<28} {t_np:>9.3f}s {'n/a':>10} {'n/a':>9}")
            continue
        t_first = bench(nb_fn, *args, repeat=1)
        t_nb = bench(nb_fn, *args, repeat=3)
        print(f"{name:<28} {t_np:>9.3f}s {t_nb:>9.3f}s {t_np / t_nb:>8.1f}x"
              f"   (first call {t_first:.2f}s)")
        a = np_fn(*args)
        bb = nb_fn(*args)
        assert np.allclose(np.asarray(a), np.asarray(bb), atol=1e-10), name


if __name__ == "__main__":
    main()
