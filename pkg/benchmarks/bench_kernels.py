"""Compare the numba kernels with their pure-numpy / interpreted twins.

Run with ``python3 benchmarks/bench_kernels.py``. Each row reports the
median wall time over repeats, after one warm-up call that absorbs JIT
compilation.
"""

import argparse
import time

import numpy as np

from discrimdes import kernels


def _time(fn, args, repeats):
    fn(*args)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def cases(rng):
    x = np.linspace(-1.0, 1.0, 20001)
    v = np.sin(40 * x) * np.exp(-x)
    xs = np.linspace(-1.0, 1.0, 4)
    ys = np.array([2.1, 1.3, 1.7, 3.2])
    ws = np.array([17.0, 16.0, 13.0, 4.0])
    axis = np.linspace(-10, 10, 41)
    pairs = np.array([(a, b) for i, a in enumerate(axis) for b in axis[i + 1 :]])
    xl = np.linspace(-1, 1, 50)
    th = np.array([1.0, -1.0, 1.0, 2.0])
    yl = kernels.expsum_eval(th, xl) + 0.05 * rng.standard_normal(50)
    lo, hi = np.array([-100.0, -10, -100, -10]), np.array([100.0, 10, 100, 10])
    th0 = np.array([0.8, -0.7, 1.2, 2.5])
    return [
        ("local_extrema (20001 pts)", kernels._local_extrema_jit, kernels._local_extrema_np, (v,)),
        ("varpro_rss (820 rate pairs)", kernels._varpro_rss_jit, kernels._varpro_rss_np, (xs, ys, ws, pairs)),
        (
            "lm_expsum (50 pts, 4 params)",
            kernels.lm_expsum,
            kernels.py_func(kernels.lm_expsum),
            (xl, yl, np.ones(50), th0, lo, hi, 200, 1e-12),
        ),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=20)
    args = ap.parse_args(argv)
    if not kernels.USE_NUMBA:
        print("numba disabled (DISCRIMDES_DISABLE_NUMBA set or numba missing); both columns run uncompiled")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<32}{'numba [ms]':>12}{'numpy/py [ms]':>15}{'speedup':>9}")
    for name, fast, slow, args_ in cases(rng):
        tf = _time(fast, args_, args.repeats)
        ts = _time(slow, args_, max(3, args.repeats // 4))
        print(f"{name:<32}{1e3 * tf:>12.3f}{1e3 * ts:>15.3f}{ts / tf:>8.1f}x")


if __name__ == "__main__":
    main()
