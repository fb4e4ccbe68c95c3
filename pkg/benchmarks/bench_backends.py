"""Compare the numba-compiled kernels with the interpreted numpy fallback.

    python benchmarks/bench_backends.py [--scenario scenario_a] [--t-end 5] [--repeat 3]
"""
import argparse
import time

import numpy as np

from gfmdac import _jit
from gfmdac.engine import kernels_for, run_scenario
from gfmdac.scenario import load_scenario, with_overrides


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def dac_batch_args(n, seed=0):
    rng = np.random.default_rng(seed)
    return (rng.uniform(59, 61, n), rng.uniform(0, 1, n), rng.uniform(-0.5, 0.5, n), rng.uniform(0, 1, n),
            np.full(n, 60.0), rng.uniform(0.5, 3, n), np.full(n, 59.9), np.full(n, 60.1), np.full(n, 100.0),
            np.full(n, 3, dtype=np.int64), np.zeros(n), np.ones(n, dtype=bool))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default="scenario_a")
    ap.add_argument("--t-end", type=float, default=5.0)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--batch", type=int, default=100_000)
    args = ap.parse_args()

    backends = ["numba", "numpy"] if _jit.NUMBA_ENABLED else ["numpy"]
    sc = with_overrides(load_scenario(args.scenario), t_end=args.t_end)
    batch = dac_batch_args(args.batch)
    print(f"{'backend':8s} {'run [s]':>10s} {'steps/s':>12s} {'dac_batch [ms]':>15s}")
    results = {}
    for be in backends:
        run_scenario(with_overrides(sc, t_end=0.01), backend=be)  # compile / cache load
        kernels_for(be).dac_batch(*batch)
        t_run = best_of(lambda: run_scenario(sc, backend=be), args.repeat)
        t_dac = best_of(lambda: kernels_for(be).dac_batch(*batch), args.repeat)
        results[be] = t_run
        print(f"{be:8s} {t_run:10.3f} {sc.sim.n_steps / t_run:12.0f} {t_dac * 1e3:15.2f}")
    if len(results) == 2:
        print(f"speed-up (numpy/numba, full run): {results['numpy'] / results['numba']:.1f}x")


if __name__ == "__main__":
    main()
