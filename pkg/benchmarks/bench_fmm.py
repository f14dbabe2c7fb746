#!/usr/bin/env python3
"""Benchmark the fast-marching kernels: compiled extension vs pure Python.

Runs both implementations on seeded rock-field speed maps at several grid
sizes, checks they produce bit-identical fields, and prints the speedup.

    python3 benchmarks/bench_fmm.py [--sizes 100 200 400] [--repeats 3]
"""

import argparse
import time

import numpy as np

from cisru_sim.nav import available_kernels


def make_speed_map(seed: int, size: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    speed = np.ones((size, size))
    blocked = rng.random((size, size)) < 0.15
    speed[blocked] = 0.0
    near = np.zeros_like(blocked)
    near[1:, :] |= blocked[:-1, :]
    near[:-1, :] |= blocked[1:, :]
    near[:, 1:] |= blocked[:, :-1]
    near[:, :-1] |= blocked[:, 1:]
    speed[near & ~blocked] = 0.5
    speed[0, 0] = 1.0
    return speed


def bench(kernel, speed, repeats, diagonals):
    src_r = np.array([0], dtype=np.int64)
    src_c = np.array([0], dtype=np.int64)
    best = float("inf")
    result = None
    for _ in range(repeats):
        start = time.perf_counter()
        result = kernel(speed, 1.0, src_r, src_c, diagonals)
        best = min(best, time.perf_counter() - start)
    return best, result


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", type=int, nargs="+", default=[100, 200, 400])
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    kernels = available_kernels()
    if "cython" not in kernels:
        print("compiled kernel not built; run `pip install -e . --no-build-isolation`")
        print("benchmarking the pure-Python kernel only\n")

    header = f"{'grid':>10} {'mode':>6} {'python':>10} {'cython':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for size in args.sizes:
        speed = make_speed_map(seed=size, size=size)
        for diagonals in (False, True):
            mode = "8-way" if diagonals else "4-way"
            t_py, ref = bench(kernels["python"], speed, args.repeats, diagonals)
            if "cython" in kernels:
                t_cy, out = bench(kernels["cython"], speed, args.repeats, diagonals)
                identical = np.array_equal(ref, out)
                print(f"{size:>7}^2 {mode:>6} {t_py*1e3:>8.1f}ms {t_cy*1e3:>8.1f}ms "
                      f"{t_py/t_cy:>7.1f}x" + ("" if identical else "  MISMATCH"))
                assert identical, "kernel outputs differ"
            else:
                print(f"{size:>7}^2 {mode:>6} {t_py*1e3:>8.1f}ms {'-':>10} {'-':>8}")


if __name__ == "__main__":
    main()
