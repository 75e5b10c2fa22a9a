"""Compare the numba kernels with the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Times one log-det derivative evaluation (the Newton-step hot spot) and one
full CCCP run on a two-RU, three-UE instance, under both backends.
"""

import argparse
import time
import timeit

import numpy as np

from secran import _kernels
from secran.optimizer import CccpProblem, StrategyFlags, initialize_feasible, run_cccp
from secran.system import SystemConfig, draw_realization


def instance(ru_antennas):
    config = SystemConfig(num_rus=2, num_ues=3, ru_antennas=ru_antennas, fronthaul_capacity=2.0).with_power_db(20)
    return config, draw_realization(config, 7)


def bench_derivs(config, channels, repeat):
    prob = CccpProblem(config, channels, StrategyFlags())
    x = prob.encode(initialize_feasible(config, channels, np.random.default_rng(0)))
    X = prob.matrices(x)
    args = (X, prob.ex.masks, prob.ex.Hs, prob.ex.M0, prob.basis)
    out = {}
    for name, fn in (("numpy", _kernels.logdet_derivs_numpy), ("numba", getattr(_kernels, "logdet_derivs_numba", None))):
        if fn is None:
            continue
        fn(*args)  # compile / warm up
        n = max(1, repeat * 20)
        out[name] = min(timeit.repeat(lambda: fn(*args), number=n, repeat=3)) / n
    return out


def bench_cccp(config, channels, repeat):
    out = {}
    prev = _kernels.USE_NUMBA
    try:
        for use in ([False, True] if _kernels.HAVE_NUMBA else [False]):
            _kernels.set_backend(use)
            run_cccp(config, channels, max_iter=1)  # warm up
            best = np.inf
            for _ in range(repeat):
                t = time.perf_counter()
                _, trace = run_cccp(config, channels, rng=0)
                best = min(best, time.perf_counter() - t)
            out["numba" if use else "numpy"] = (best, trace.objective[-1])
    finally:
        _kernels.set_backend(prev)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(f"{'case':34s} {'numpy':>12s} {'numba':>12s} {'speedup':>8s}")
    for nri in (1, 2):
        config, ch = instance(nri)
        d = bench_derivs(config, ch, args.repeat)
        if "numba" in d:
            print(f"{f'log-det derivatives, n_R,i={nri}':34s} {d['numpy'] * 1e6:10.1f}us {d['numba'] * 1e6:10.1f}us "
                  f"{d['numpy'] / d['numba']:7.1f}x")
        c = bench_cccp(config, ch, args.repeat)
        if "numba" in c:
            (tn, on), (tb, ob) = c["numpy"], c["numba"]
            print(f"{f'full CCCP run, n_R,i={nri}':34s} {tn * 1e3:10.1f}ms {tb * 1e3:10.1f}ms {tn / tb:7.1f}x"
                  f"   objective diff {abs(on - ob):.1e}")


if __name__ == "__main__":
    main()
