"""Time the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_core.py [--repeat N]

Workloads mirror what one analysis run does: a propensity refit per
bootstrap replicate, LOO-CV over a 30-point bandwidth grid, and the
shifted-max quantile scan over a 2001-point tau grid.
"""
import argparse
import sys
import timeit

import numpy as np

from diffbound import _core_py

try:
    from diffbound import _core
except ImportError:
    _core = None


def workloads(rng):
    n, p = 1000, 7
    D = np.column_stack([np.ones(n), rng.standard_normal((n, p - 1))])
    t = (rng.random(n) < 1 / (1 + np.exp(-D @ rng.normal(0, 0.3, p)))).astype(float)
    xs = rng.standard_normal(800)
    ys = np.sin(xs) + 0.3 * rng.standard_normal(800)
    grid = np.geomspace(0.02, 5.0, 30)
    L, G = 1000, 2001
    r1, r2 = rng.standard_normal(L), rng.standard_normal(L)
    s1 = np.minimum(rng.normal(0, 2, G), 0.0)
    s2 = np.minimum(rng.normal(0, 2, G), 0.0)
    return {
        "irls_logistic (n=1000, p=7)": lambda m: m.irls_logistic(D, t, 100, 1e-8, 0.0, 30.0),
        "loo_cv_scores (n=800, 30 bandwidths)": lambda m: m.loo_cv_scores(xs, ys, grid, 0),
        "shifted_max_quantiles (L=1000, 2001 taus)": lambda m: m.shifted_max_quantiles(r1, r2, s1, s2, 954),
    }


def best_of(fn, repeat):
    number = 1
    while timeit.timeit(fn, number=number) < 0.2:
        number *= 2
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _core is None:
        print("compiled kernels not built; run `pip install -e . --no-build-isolation` first",
              file=sys.stderr)
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':<44} {'numpy (ms)':>11} {'cython (ms)':>12} {'speedup':>8}")
    for name, fn in workloads(rng).items():
        tp = best_of(lambda: fn(_core_py), args.repeat)
        tc = best_of(lambda: fn(_core), args.repeat)
        print(f"{name:<44} {tp * 1e3:11.3f} {tc * 1e3:12.3f} {tp / tc:7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
