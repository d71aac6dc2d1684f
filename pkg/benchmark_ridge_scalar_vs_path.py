import time

import numpy as np

from classical_ridge import alpha_grid, default_alpha_range, ridge_path, solve_ridge_normal
from dataset_io import random_dataset


def run_benchmark():
    d = random_dataset(400, 20, seed=7)
    lo, hi = default_alpha_range(d)
    alphas = alpha_grid(lo, hi, 200)

    # one normal-equation solve per alpha
    t0 = time.perf_counter()
    scalar = np.stack([solve_ridge_normal(d, a).w for a in alphas])
    t_scalar = time.perf_counter() - t0

    # single SVD reused across the grid
    t0 = time.perf_counter()
    path = ridge_path(d, alphas)
    t_path = time.perf_counter() - t0

    gap = float(np.max(np.abs(scalar - path)))
    print(f"Scalar: {t_scalar:.4f}s | Path: {t_path:.4f}s | Speedup: {t_scalar/t_path:.1f}x | max gap {gap:.2e}")


if __name__ == "__main__":
    run_benchmark()
