"""
Abstract query-complexity models, polylog factors fixed to log2².

They are reported next to the measured oracle counters; absolute units are meaningless.
"""

import math
from typing import Sequence


def _polylog(dim: float) -> float:
    return math.log2(max(dim, 2.0)) ** 2


def alg1_state_cost(n_plus_m: int, x_max: float, kappa: float, eps: float) -> float:
    """Preparing the fitting-parameter state: ‖X‖²_max κ³/ε³."""
    return _polylog(n_plus_m) * x_max ** 2 * kappa ** 3 / eps ** 3


def w_norm_cost(n_plus_m: int, x_max: float, kappa: float, eps: float) -> float:
    """Estimating ‖w‖² on top of the state: ‖X‖²_max κ³/ε⁴."""
    return _polylog(n_plus_m) * x_max ** 2 * kappa ** 3 / eps ** 4


def alg2_cost(L: int, n_plus_m: int, x_max: float, kappa_fold: float, kappa: float, eps: float) -> float:
    """Quantum K-fold sweep over L candidates: L ‖X‖²_max κ'⁴ κ/ε⁴."""
    return L * _polylog(n_plus_m) * x_max ** 2 * kappa_fold ** 4 * kappa / eps ** 4


def classical_cv_cost(L: int, N: int, M: int, fold_ranks: Sequence[int], eps: float) -> float:
    """Sketched classical K-fold baseline: L N M + L N² Σ_l R_l log(R_l/ε)/ε²."""
    tail = sum(r * math.log(max(r, 1) / eps) for r in fold_ranks)
    return L * N * M + L * N * N * tail / eps ** 2
