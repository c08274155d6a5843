"""Time the compiled kernels against the numpy fallback on bioreactor workloads.

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""
import argparse
import time

import numpy as np

from robust_periodic import _kernels_py as pure
from robust_periodic.kernels import compiled
from robust_periodic.systems import BIOREACTOR, BioreactorParams, mode_table

PARAMS = BioreactorParams().kernel_params()


def workloads(rng):
    y0 = np.array([6.52, 12.5, 22.4]) + rng.uniform(-0.05, 0.05, (100, 3))
    u = np.full((400, 1), 30.0)
    w = rng.uniform(-0.005, 0.005, (100, 400, 3))
    nodes = np.stack(np.meshgrid(np.linspace(4.8, 7.5, 20), np.linspace(11, 26, 20),
                                 np.linspace(17.5, 26, 20), indexing="ij"), -1).reshape(-1, 3)
    modes = mode_table(28.7, 40.0, 10)[:, None]
    weights = np.array([0.0, 0.0, 0.15])
    return {
        "euler_rollout (100 starts x 400 steps)":
            lambda m: m.euler_rollout(BIOREACTOR, PARAMS, y0, u, 0.0025, w),
        "rk4_rollout (100 starts x 400 steps x 10)":
            lambda m: m.rk4_rollout(BIOREACTOR, PARAMS, y0, u, 0.0025, 10, w),
        "euler_transitions (8000 nodes x 10 modes x 100 steps)":
            lambda m: m.euler_transitions(BIOREACTOR, PARAMS, nodes, modes, 100, 0.01, weights),
    }


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if compiled is None:
        raise SystemExit("compiled extension not available (build it or unset ROBUST_PERIODIC_PURE)")
    rng = np.random.default_rng(0)
    print(f"{'kernel':58s} {'cython s':>10s} {'python s':>10s} {'speedup':>8s}")
    for name, run in workloads(rng).items():
        tc = best_of(lambda: run(compiled), args.repeat)
        tp = best_of(lambda: run(pure), args.repeat)
        print(f"{name:58s} {tc:10.4f} {tp:10.4f} {tp / tc:8.1f}x")


if __name__ == "__main__":
    main()
