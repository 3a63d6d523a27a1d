"""Compare the compiled kernels against the pure-Python fallbacks.

Usage: python3 benchmarks/bench_kernels.py [--sizes 200,500,1000]
"""

import argparse
import random
import time

from clair_eval import _kernels_py, kernels


def time_call(fn, *args, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="200,500,1000",
                        help="Comma-separated input lengths.")
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    if kernels.BACKEND != "compiled":
        print("compiled extension not available; benchmarking fallback against itself")
    rng = random.Random(0)

    print(f"{'kernel':<24}{'n':>8}{'python':>12}{'compiled':>12}{'speedup':>10}")
    for n in sizes:
        a = [rng.randrange(50) for _ in range(n)]
        b = [rng.randrange(50) for _ in range(n)]
        t_py = time_call(_kernels_py.lcs_length, a, b)
        t_c = time_call(kernels.lcs_length, a, b)
        print(f"{'lcs_length':<24}{n:>8}{t_py:>11.4f}s{t_c:>11.4f}s{t_py / t_c:>9.1f}x")
    for n in sizes:
        x = [float(rng.randrange(10)) for _ in range(n)]
        y = [rng.random() for _ in range(n)]
        t_py = time_call(_kernels_py.kendall_pair_counts, x, y)
        t_c = time_call(kernels.kendall_pair_counts, x, y)
        print(f"{'kendall_pair_counts':<24}{n:>8}{t_py:>11.4f}s{t_c:>11.4f}s{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
