#!/usr/bin/env python3
"""Benchmark the compiled coordinate-descent kernel against the Python fallback.

Generates a random sparse binary problem shaped like TF-IDF training data
(unit-norm rows, long tail of features), then times full solves with each
sweep kernel and checks that the solutions agree.

Usage: python benchmarks/bench_dcd.py [--rows 4000] [--features 50000] [--nnz 120]
"""

import argparse
import time

import numpy as np

from sumaug import svm
from sumaug.svm import TrainConfig, _dcd_py
from sumaug.vectorize import SparseVector

try:
    from sumaug.svm import _dcd as _dcd_c
except ImportError:
    _dcd_c = None


def random_problem(rows, features, nnz, seed=0):
    rng = np.random.default_rng(seed)
    X = []
    w_true = rng.standard_normal(features)
    y = np.empty(rows)
    for i in range(rows):
        idx = np.sort(rng.choice(features, size=nnz, replace=False)).astype(np.int64)
        vals = np.abs(rng.standard_normal(nnz))
        vals /= np.linalg.norm(vals)
        X.append(SparseVector(indices=idx, values=vals, dim=features))
        y[i] = 1.0 if w_true[idx] @ vals >= 0 else -1.0
    y[0], y[1] = 1.0, -1.0
    return X, y


def time_solve(csr, y, cfg, sweep):
    start = time.perf_counter()
    sol = svm._solve_csr(csr, y, cfg, _sweep=sweep)
    return time.perf_counter() - start, sol


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--rows", type=int, default=4000)
    parser.add_argument("--features", type=int, default=50_000)
    parser.add_argument("--nnz", type=int, default=120)
    parser.add_argument("--sweeps", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    print(f"problem: {args.rows} rows x {args.features} features, {args.nnz} nnz/row")
    X, y = random_problem(args.rows, args.features, args.nnz, args.seed)
    csr = svm._to_csr(X, True, 1.0)
    # tiny tol so both kernels run the full sweep budget
    cfg = TrainConfig(max_sweeps=args.sweeps, tol=1e-300, seed=args.seed)

    t_py, sol_py = time_solve(csr, y, cfg, _dcd_py.sweep)
    print(f"python   kernel: {t_py:8.3f} s  ({args.sweeps} sweeps)")
    if _dcd_c is None:
        print("compiled kernel: unavailable (extension not built)")
        return
    t_c, sol_c = time_solve(csr, y, cfg, _dcd_c.sweep)
    print(f"compiled kernel: {t_c:8.3f} s  ({args.sweeps} sweeps)")
    print(f"speedup: {t_py / t_c:.1f}x")
    diff = float(np.max(np.abs(sol_py.w - sol_c.w)))
    print(f"max |w_py - w_c| = {diff:.3e}")
    assert diff < 1e-8, "kernels disagree"


if __name__ == "__main__":
    main()
