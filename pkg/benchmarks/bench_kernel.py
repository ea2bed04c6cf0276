"""Compiled vs pure-Python Q-learning kernel on the default gridworld suite.

Usage:
    python benchmarks/bench_kernel.py [--steps 50000] [--repeats 3]

Both kernels consume the same pre-drawn uniforms, so the script also checks
that their bin sums agree exactly.
"""
import argparse
import time

import numpy as np

from crlab.environments import build_gridworld_suite
from crlab.experiments import QLearnerConfig, _pykernel, qlearning


def bench(sim, arrays, cfg, steps, repeats):
    qlearning._simulate = sim
    best, out = float("inf"), None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = qlearning.single_run(arrays, cfg, steps, 0, 0, 1000, 100)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=50_000)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    arrays = qlearning.suite_arrays(build_gridworld_suite(5, 5, 10, seed=0))
    cfg = QLearnerConfig.annealed()
    original = qlearning._simulate
    try:
        from crlab.experiments import _kernel
    except ImportError:
        print("compiled kernel not built; run `pip install -e . --no-build-isolation` first")
        return
    t_c, out_c = bench(_kernel.simulate, arrays, cfg, args.steps, args.repeats)
    t_p, out_p = bench(_pykernel.simulate, arrays, cfg, args.steps, args.repeats)
    qlearning._simulate = original
    same = all(np.array_equal(a, b) for a, b in zip(out_c[:3], out_p[:3])) and out_c[3] == out_p[3]
    print(f"steps per run        {args.steps}")
    print(f"compiled             {t_c * 1e3:9.2f} ms  ({args.steps / t_c / 1e6:6.2f} M steps/s)")
    print(f"pure python          {t_p * 1e3:9.2f} ms  ({args.steps / t_p / 1e6:6.2f} M steps/s)")
    print(f"speedup              {t_p / t_c:9.1f}x")
    print(f"identical results    {same}")


if __name__ == "__main__":
    main()
