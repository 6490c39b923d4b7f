"""Time the numba and numpy graph kernels on random invitation graphs.

    python3 benchmarks/bench_kernels.py --sizes 50 200 800 --repeat 3

Both backends are checked for identical output on every graph before timing.
Compilation happens in a warm-up call and is not timed.
"""
import argparse
import time

import numpy as np

from diffusion_auction import kernels


def random_graph(n, degree, seed):
    rng = np.random.default_rng(seed)
    m = n * degree
    src = rng.integers(0, n, m)
    dst = rng.integers(1, n, m)
    keep = src != dst
    return kernels.to_csr(n, src[keep], dst[keep])


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[50, 200, 800])
    ap.add_argument("--degree", type=int, default=3, help="average out-degree")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    kernels.warmup()
    print(f"{'kernel':<22}{'n':>6}{'numba s':>12}{'numpy s':>12}{'speedup':>10}")
    for n in args.sizes:
        indptr, indices = random_graph(n, args.degree, args.seed + n)
        for name, fn in (("immediate_dominators", kernels.immediate_dominators),
                         ("removal_reachability", kernels.removal_reachability)):
            a = fn(indptr, indices, 0, backend="numba")
            b = fn(indptr, indices, 0, backend="numpy")
            if not np.array_equal(a, b):
                raise SystemExit(f"{name}: backends disagree on n={n}")
            tn = best_time(lambda: fn(indptr, indices, 0, backend="numba"), args.repeat)
            tp = best_time(lambda: fn(indptr, indices, 0, backend="numpy"), args.repeat)
            print(f"{name:<22}{n:>6}{tn:>12.5f}{tp:>12.5f}{tp / tn:>9.1f}x")


if __name__ == "__main__":
    main()
