"""
Numba vs numpy timing of the per-trial statistics kernel.

    python3 benchmarks/bench_kernels.py [--trials N] [--repeat R]

Both paths get identical inputs; the script checks that they agree before
timing them. The first numba call (compilation or cache load) is excluded.
"""

import argparse
import time

import numpy as np

from mwrelay import kernels
from mwrelay._accel import HAVE_NUMBA
from mwrelay.channel import SystemParams, crandn, estimation_moments, mmse_shortcut
from mwrelay.simulator import _QPSK

SHAPES = [(8, 2), (8, 5), (32, 5), (128, 5), (128, 10), (512, 20)]


def make_inputs(M, K, n, seed=0):
    rng = np.random.default_rng(seed)
    params = SystemParams(M, K, 200, K, 1.0, 1.0, 10.0)
    beta = np.ones(K)
    G = crandn(rng, (n, M, K))
    G_hat = mmse_shortcut(G, crandn(rng, (n, M, K)), beta, params)
    x = _QPSK[rng.integers(0, 4, (n, K))]
    noise = crandn(rng, (n, M))
    alpha = 1.0 / (M ** 3 * K)
    return params, (G_hat, G, x, noise, 1, alpha, params.P_u), estimation_moments(beta, K, 1)


def best_of(func, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        func(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    ap.add_argument("--trials", type=int, default=2048)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not installed; only the numpy path is available")
    print(f"{'M':>5} {'K':>4} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for M, K in SHAPES:
        n = max(64, args.trials * 32 // max(M, 32))
        _, call, _ = make_inputs(M, K, n)
        t_np = best_of(kernels.trial_stats_numpy, call, args.repeat)
        if HAVE_NUMBA:
            ref = kernels.trial_stats_numpy(*call)
            got = kernels.trial_stats_numba(*call)
            for a, b in zip(ref, got):
                np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)
            t_nb = best_of(kernels.trial_stats_numba, call, args.repeat)
            print(f"{M:5d} {K:4d} {1e3 * t_np / n * 1000:10.3f} "
                  f"{1e3 * t_nb / n * 1000:10.3f} {t_np / t_nb:8.2f}x   (per 1000 trials)")
        else:
            print(f"{M:5d} {K:4d} {1e3 * t_np / n * 1000:10.3f} {'-':>10} {'-':>8}")


if __name__ == "__main__":
    main()
