"""Time the numba kernels against the pure-numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import time

import numpy as np

from scdual._kernels import NUMBA_KERNELS, NUMPY_KERNELS


def cases(rng):
    n, p = 6000, 25
    Z = np.column_stack([np.ones(n), rng.standard_normal((n, p - 1))])
    c = (rng.random(n) < 0.5).astype(float)
    eta = 0.1 * rng.standard_normal(n)
    innov = rng.standard_normal((6000, 30))
    X = rng.standard_normal((400, 14, 13))
    Xc = rng.standard_normal((150, 3))
    return {
        "tilted_grad_hess": (Z, 1 - c, c, eta),
        "ar1_recursion": (innov[:, 0].copy(), innov, 0.5),
        "lag1_autocorr": (innov, 1e-12, True),
        "twoway_demean": (X, 1e-12, 1000),
        "entropy_mirror": (Xc, Xc[:20].mean(0), 1.0, 170.0, 20_000, 1e-13),
    }


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for name, a in cases(rng).items():
        NUMBA_KERNELS[name](*a)  # compile
        t_np = best_of(NUMPY_KERNELS[name], a, args.repeat)
        t_nb = best_of(NUMBA_KERNELS[name], a, args.repeat)
        print(f"{name:<18}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>10.1f}")


if __name__ == "__main__":
    main()
