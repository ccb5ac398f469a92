"""Benchmark the numba kernels against the pure-numpy fallbacks.

Run:  python3 benchmarks/bench_kernels.py [--repeat N]

Both backends are imported from the same module, so this compares the
exact implementations selected by the MINIDRIVE_NO_NUMBA flag.
"""

import argparse
import time

import numpy as np

from minidrive import kernels
from minidrive.raster import box_corners


def timeit(fn, repeat):
    fn()  # warm-up (numba compilation, caches)
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)

    dcoeffs = rng.uniform(-2, 2, size=(40, 2, 6))
    taus = rng.uniform(0, 0.1, size=4000)
    idx = rng.integers(0, 40, size=4000)

    seg_p0 = rng.uniform(0, 224, size=(200, 2))
    seg_p1 = rng.uniform(0, 224, size=(200, 2))

    polys = [
        box_corners(*rng.uniform(40, 180, 2), rng.uniform(0, 6.3), 60, 40)
        for _ in range(20)
    ]

    boxes = [
        (
            box_corners(*rng.uniform(-3, 3, 2), rng.uniform(0, 6.3), 4.5, 1.8),
            box_corners(*rng.uniform(-3, 3, 2), rng.uniform(0, 6.3), 4.5, 1.8),
        )
        for _ in range(2000)
    ]

    polyline = rng.uniform(-50, 50, size=(500, 2))
    points = rng.uniform(-60, 60, size=(500, 2))

    cases = [
        (
            "poly_eval (4k pts)",
            lambda f: f(dcoeffs, taus, idx),
            kernels._poly_eval_loop,
            kernels._poly_eval_numpy,
        ),
        (
            "draw_segments (200 segs)",
            lambda f: f(np.zeros((224, 224), np.float32), seg_p0, seg_p1, 1.0),
            kernels._draw_segments_loop,
            kernels._draw_segments_numpy,
        ),
        (
            "fill_polygon (20 boxes)",
            lambda f: [f(np.zeros((224, 224), np.float32), p, 1.0) for p in polys],
            kernels._fill_polygon_loop,
            kernels._fill_polygon_numpy,
        ),
        (
            "boxes_overlap (2k pairs)",
            lambda f: [f(a, b) for a, b in boxes],
            kernels._boxes_overlap_loop,
            kernels._boxes_overlap_numpy,
        ),
        (
            "polyline_min_dist (500 pts x 500 segs)",
            lambda f: [f(p[0], p[1], polyline) for p in points],
            kernels._polyline_min_dist_loop,
            kernels._polyline_min_dist_numpy,
        ),
    ]

    backend = "numba" if kernels.NUMBA_ENABLED else "numpy (numba disabled)"
    print(f"active backend: {backend}")
    print(f"{'kernel':<40} {'loop/numba':>12} {'numpy':>12} {'speedup':>9}")
    for name, call, loop_fn, numpy_fn in cases:
        t_loop = timeit(lambda: call(loop_fn), args.repeat)
        t_np = timeit(lambda: call(numpy_fn), args.repeat)
        print(
            f"{name:<40} {t_loop * 1e3:>10.3f}ms {t_np * 1e3:>10.3f}ms "
            f"{t_np / t_loop:>8.2f}x"
        )


if __name__ == "__main__":
    main()
