"""Compare the compiled kernels with the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5]

Prints the best-of-N wall time for each kernel and backend, plus the speedup.
Results are checked for equality before timing.
"""
import argparse
import time

import numpy as np

from diodeq._kernels import compiled_kernels, python_kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    X = rng.normal(size=(700, 2))
    Q = rng.normal(size=(130, 2))
    y = np.sin(3 * X[:, 0]) + X[:, 1] ** 2
    order = np.argsort(X, axis=0, kind="stable")
    Xw = rng.normal(size=(5000, 6))
    yw = Xw @ rng.normal(size=6)
    order_w = np.argsort(Xw, axis=0, kind="stable")
    return [
        ("knn_search n=700 q=130 k=4 p=4", "knn_search", (X, Q, 4, 4.0)),
        ("knn_search n=700 q=130 k=4 p=2", "knn_search", (X, Q, 4, 2.0)),
        ("best_split n=700 f=2", "best_split", (X, y, order, 1)),
        ("best_split n=5000 f=6", "best_split", (Xw, yw, order_w, 1)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if compiled_kernels is None:
        print("compiled extension not built; only the fallback is available")
    rng = np.random.default_rng(0)
    print(f"{'case':<34}{'fallback [ms]':>15}{'compiled [ms]':>15}{'speedup':>10}")
    for name, kernel, argv in cases(rng):
        py = getattr(python_kernels, kernel)
        t_py = best_of(lambda: py(*argv), args.repeat)
        if compiled_kernels is None:
            print(f"{name:<34}{t_py * 1e3:>15.3f}{'-':>15}{'-':>10}")
            continue
        c = getattr(compiled_kernels, kernel)
        a, b = py(*argv), c(*argv)
        for u, v in zip(a, b):
            np.testing.assert_allclose(u, v, rtol=1e-12, atol=1e-12)
        t_c = best_of(lambda: c(*argv), args.repeat)
        print(f"{name:<34}{t_py * 1e3:>15.3f}{t_c * 1e3:>15.3f}{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
