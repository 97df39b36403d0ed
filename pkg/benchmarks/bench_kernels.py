#!/usr/bin/env python3
"""Benchmark the compiled count-vector moment kernel against the NumPy
reference on the workloads that dominate runtime: large truncated-Poisson
grids (exact variance sums) and long Monte Carlo count batches.

Usage: python benchmarks/bench_kernels.py [--rows 400000] [--repeat 5]
"""

import argparse
import time

import numpy as np

from qidlab.instances import random_collection
from qidlab.kernels import _ref, backend_name

try:
    from qidlab.kernels import _fast
except ImportError:
    _fast = None


def bench(fn, counts, p, mu, ov, tri, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(counts, p, mu, ov, tri)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=400_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    print(f"active backend: {backend_name()}")
    print(f"{'N':>4} {'rows':>9} {'ref s':>9} {'fast s':>9} {'speedup':>8} {'max|diff|':>10}")
    for n in (2, 4, 8, 16):
        coll = random_collection(2, n, rng)
        ov, tri = coll.overlap_tables()
        counts = rng.poisson(8.0, size=(args.rows, n)).astype(float)
        t_ref, (m_ref, v_ref) = bench(_ref.count_stats, counts, coll.weights, 16.0, ov, tri, args.repeat)
        if _fast is None:
            print(f"{n:>4} {args.rows:>9} {t_ref:>9.4f} {'n/a':>9} {'n/a':>8} {'n/a':>10}")
            continue
        t_fast, (m_fast, v_fast) = bench(_fast.count_stats, counts, coll.weights, 16.0, ov, tri, args.repeat)
        diff = max(np.abs(m_ref - m_fast).max(), np.abs(v_ref - v_fast).max())
        print(f"{n:>4} {args.rows:>9} {t_ref:>9.4f} {t_fast:>9.4f} {t_ref / t_fast:>8.2f} {diff:>10.2e}")


if __name__ == "__main__":
    main()
