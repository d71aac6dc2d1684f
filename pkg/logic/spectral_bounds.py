"""
Closed forms for the ridge spectral filter h(λ, α) = (N+M)λ/(λ²+α) and its
relative sensitivity g(λ, α) = (α - λ²)/(λ(λ²+α)) over the window
λ ∈ [(N+M)/κ, N+M].
"""

import math
from typing import Dict

import numpy as np

from qridge_errors import InputError

# |g| peaks at λ² = (2 + √5)·α on its negative branch
G_PEAK = 2.0 + math.sqrt(5.0)
GRID_POINTS = 100_000


def _check(n_plus_m: float, kappa: float, alpha: float) -> None:
    if n_plus_m <= 0 or alpha <= 0:
        raise InputError(f"need N+M > 0 and alpha > 0, got {n_plus_m}, {alpha}")
    if kappa < 1:
        raise InputError(f"condition number must be >= 1, got {kappa}")


def h(lam, n_plus_m: float, alpha: float):
    lam = np.asarray(lam, dtype=float)
    return n_plus_m * lam / (lam * lam + alpha)


def g(lam, alpha: float):
    lam = np.asarray(lam, dtype=float)
    return (alpha - lam * lam) / (lam * (lam * lam + alpha))


def window(n_plus_m: float, kappa: float, points: int = GRID_POINTS) -> np.ndarray:
    return np.linspace(n_plus_m / kappa, n_plus_m, points)


def h_max(n_plus_m: float, kappa: float, alpha: float) -> float:
    _check(n_plus_m, kappa, alpha)
    nm2 = n_plus_m * n_plus_m
    if alpha <= nm2 / (kappa * kappa):
        return nm2 * kappa / (nm2 + kappa * kappa * alpha)
    if alpha <= nm2:
        return n_plus_m / (2.0 * math.sqrt(alpha))
    return nm2 / (nm2 + alpha)


def h_ratio_bound(kappa: float) -> float:
    if kappa < 1:
        raise InputError(f"condition number must be >= 1, got {kappa}")
    return kappa + 1.0 / kappa


def h_ratio_empirical(n_plus_m: float, kappa: float, alpha: float, points: int = GRID_POINTS) -> float:
    vals = h(window(n_plus_m, kappa, points), n_plus_m, alpha)
    return float(vals.max() / vals.min())


def g_max_branches(n_plus_m: float, kappa: float, alpha: float) -> Dict[str, float]:
    """
    Candidate values of max|g| on the window: the left endpoint, the right
    endpoint and the interior stationary point. A peak that rounds outside
    the window is clamped to the nearer endpoint.
    """
    _check(n_plus_m, kappa, alpha)
    lo, hi = n_plus_m / kappa, n_plus_m
    out = {
        "left": float(abs(g(lo, alpha))),
        "right": float(abs(g(hi, alpha))),
    }
    peak = math.sqrt(G_PEAK * alpha)
    if lo <= peak <= hi:
        out["interior"] = (1.0 + math.sqrt(5.0)) / (math.sqrt(G_PEAK) * (3.0 + math.sqrt(5.0)) * math.sqrt(alpha))
    else:
        out["interior"] = float(abs(g(min(max(peak, lo), hi), alpha)))
    return out


def g_max_case(n_plus_m: float, kappa: float, alpha: float) -> int:
    """Which of the five α ranges holds (1-based), ranges half-open on the left."""
    nm2 = n_plus_m * n_plus_m
    k2 = kappa * kappa
    breaks = (nm2 / (G_PEAK * k2), nm2 / k2, nm2 / G_PEAK, nm2)
    for case, bp in enumerate(breaks, start=1):
        if alpha <= bp:
            return case
    return 5


def g_max(n_plus_m: float, kappa: float, alpha: float) -> float:
    """
    max|g(λ, α)| over λ ∈ [(N+M)/κ, N+M].

    The five-range case list needs ordered breakpoints, which requires
    κ² >= 2 + √5; below that the candidates are compared directly.
    """
    b = g_max_branches(n_plus_m, kappa, alpha)
    if kappa * kappa < G_PEAK:
        return max(b.values())
    case = g_max_case(n_plus_m, kappa, alpha)
    if case == 1:
        return b["left"]
    if case == 2:
        return b["interior"]
    if case == 3:
        return max(b["left"], b["interior"])
    if case == 4:
        return max(b["left"], b["right"])
    return b["left"]


def grid_max_h(n_plus_m: float, kappa: float, alpha: float, points: int = GRID_POINTS) -> float:
    return float(np.max(h(window(n_plus_m, kappa, points), n_plus_m, alpha)))


def grid_max_abs_g(n_plus_m: float, kappa: float, alpha: float, points: int = GRID_POINTS) -> float:
    return float(np.max(np.abs(g(window(n_plus_m, kappa, points), alpha))))
