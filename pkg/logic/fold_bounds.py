"""
Bounds tying per-fold spectra and probabilities to the full dataset.

Each check returns a BoundReport; none of them raises on a violated bound.
"""

import math
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

import numkit
from classical_ridge import (
    Dataset,
    FoldPartition,
    cv_error_exact,
    fold_kappa_convention,
    fold_solution,
    masked_design,
    psi0_weight,
)
from logic.bound_report import BOUND_SLACK, BoundReport
from qridge_errors import InputError

GOOD_FIT_RATIO = 0.05
GOOD_FIT_P2 = 0.95


def _full_svdvals(X: np.ndarray, count: int) -> np.ndarray:
    s = np.sort(scipy.linalg.svdvals(X))[::-1]
    out = np.zeros(count)
    out[: min(count, s.size)] = s[:count]
    return out


def weyl_interval(d: Dataset, p: FoldPartition, l: int) -> Tuple[np.ndarray, np.ndarray, BoundReport]:
    """
    λ_j² - ‖X_lᵀX_l‖ <= λ_lj² <= λ_j², both spectra sorted descending and index-paired.

    Returns:
        (lower, upper, report) where lower/upper bound λ_lj² per j
    """
    split = masked_design(d, p, l)
    count = min(d.N, d.M)
    lam2 = _full_svdvals(d.X, count) ** 2
    lam_l2 = _full_svdvals(split.X_minus_l, count) ** 2
    shift = numkit.spectral_norm(split.X_l) ** 2
    lower = lam2 - shift
    upper = lam2
    slack = BOUND_SLACK * max(1.0, float(lam2[0]) if lam2.size else 1.0)
    margin = float(min(np.min(lam_l2 - lower), np.min(upper - lam_l2)))
    report = BoundReport(
        name="weyl_interval",
        analytic_value=float(shift),
        empirical_value=float(np.max(lam2 - lam_l2)),
        satisfied=margin >= -slack,
        margin=margin,
        details={"fold": l, "lambda_sq": lam2.tolist(), "lambda_fold_sq": lam_l2.tolist()},
    )
    return lower, upper, report


def k_min_recommendation(d: Dataset) -> int:
    """ceil(N·M·‖X‖²_max·κ² / (N+M)²), clamped to [2, N]."""
    raw = d.N * d.M * d.x_max ** 2 * d.kappa ** 2 / d.NM ** 2
    k = math.ceil(raw - 1e-12 * raw)
    return int(min(max(k, 2), d.N))


def fold_w_norms(d: Dataset, p: FoldPartition, alpha: float):
    return [float(np.sum(fold_solution(d, p, l, alpha).w ** 2)) for l in range(p.K)]


def pw_classical(d: Dataset, p: FoldPartition, alpha: float, C2: float) -> float:
    """P_w = Σ_l |S_l| C²(N+M)² ‖w_l‖² / Σ_l |S_l| ‖y_{-l}‖²."""
    num = 0.0
    for size, wn in zip(p.sizes(), fold_w_norms(d, p, alpha)):
        num += size * wn
    return C2 * C2 * d.NM ** 2 * num / (psi0_weight(d, p) * d.y_norm_sq)


def pw_lower_bound(d: Dataset, p: FoldPartition, alpha: float, C2: float,
                   P_w: Optional[float] = None) -> BoundReport:
    """
    Fold-gradient chain Σ_l ‖X_{-l}ᵀy_{-l}‖² >= (K-1)²‖Xᵀy‖²/K and the
    P_w floor it implies:

        P_w >= C²(N+M)² min|S_l| (K-1)²‖Xᵀy‖² / (K (λ²_max + α)² Σ_l |S_l|‖y_{-l}‖²)
    """
    if alpha <= 0 or C2 <= 0:
        raise InputError("pw_lower_bound needs alpha > 0 and C2 > 0")
    grad = d.X.T @ d.y
    chain_rhs = (p.K - 1) ** 2 * float(grad @ grad) / p.K
    chain_lhs = 0.0
    lam_max = 0.0
    for l in range(p.K):
        split = masked_design(d, p, l)
        gl = split.X_minus_l.T @ split.y_minus_l
        chain_lhs += float(gl @ gl)
        lam_max = max(lam_max, numkit.spectral_norm(split.X_minus_l))
    chain_ok = chain_lhs >= chain_rhs - BOUND_SLACK * max(1.0, chain_rhs)

    denom = psi0_weight(d, p) * d.y_norm_sq
    bound = C2 * C2 * d.NM ** 2 * min(p.sizes()) * chain_rhs / ((lam_max ** 2 + alpha) ** 2 * denom)
    value = pw_classical(d, p, alpha, C2) if P_w is None else float(P_w)

    kappa_fold = max(fold_kappa_convention(d, p, l) for l in range(p.K))
    asymptotic = 1.0 / (kappa_fold ** 2 * d.kappa_convention ** 2)
    report = BoundReport.lower(
        "pw_lower_bound", bound, value,
        chain_lhs=chain_lhs, chain_rhs=chain_rhs, chain_holds=bool(chain_ok),
        asymptotic_floor=asymptotic, asymptotic_holds=bool(value >= asymptotic),
        kappa_fold=kappa_fold, kappa=d.kappa_convention,
    )
    report.satisfied = report.satisfied and chain_ok and value >= asymptotic
    return report


def fold_predictions(d: Dataset, p: FoldPartition, alpha: float) -> np.ndarray:
    """ŷ_τ = x_τᵀ w_{l(τ)}: every row predicted by the model that never saw it."""
    yhat = np.zeros(d.N)
    for l, rows in enumerate(p.folds):
        w = fold_solution(d, p, l, alpha).w
        yhat[list(rows)] = d.X[list(rows)] @ w
    return yhat


def w_fold_norm_bound(d: Dataset, p: FoldPartition, alpha: float) -> BoundReport:
    """
    ‖w_l‖² <= κ'_l²‖y‖²/(N+M)² for every fold, with no fit assumption.

    Reported as the worst fold's ratio ‖w_l‖²(N+M)²/(κ'_l²‖y‖²) against 1.
    """
    y2 = d.y_norm_sq
    kappas = [fold_kappa_convention(d, p, l) for l in range(p.K)]
    w_norms = fold_w_norms(d, p, alpha)
    if y2 == 0.0:
        return BoundReport.not_applicable("w_fold_norm", "zero output vector", w_norms=w_norms, kappa_fold=kappas)
    ratios = [wn * d.NM ** 2 / (k * k * y2) for wn, k in zip(w_norms, kappas)]
    return BoundReport.upper("w_fold_norm", 1.0, max(ratios), w_norms=w_norms, kappa_fold=kappas)


def p1_p2_goodfit_bounds(d: Dataset, p: FoldPartition, alpha: float) -> BoundReport:
    """
    On good-fit instances (CV error <= 5% of ‖y‖²):
    ‖w_l‖² <= κ'²‖y‖²/(N+M)², P1 >= (N+M)²/(M N κ'² ‖X‖²_max) and P2 >= 0.95.
    """
    terms = cv_error_exact(d, p, alpha)
    y2 = d.y_norm_sq
    if terms.E > GOOD_FIT_RATIO * y2:
        return BoundReport.not_applicable(
            "p1_p2_goodfit", "cv error above good-fit threshold", cv_ratio=terms.E / y2
        )
    w_report = w_fold_norm_bound(d, p, alpha)
    kappa_fold = max(w_report.details["kappa_fold"])
    w_norms = w_report.details["w_norms"]
    w_ok = w_report.satisfied

    yhat = fold_predictions(d, p, alpha)
    weighted = sum(size * wn for size, wn in zip(p.sizes(), w_norms))
    P1 = float(yhat @ yhat) / (d.M * d.x_max ** 2 * weighted)
    p1_floor = d.NM ** 2 / (d.M * d.N * kappa_fold ** 2 * d.x_max ** 2)
    overlap = float(yhat @ d.y) / math.sqrt(float(yhat @ yhat) * y2)
    P2 = 0.5 + 0.5 * overlap * overlap

    report = BoundReport.lower(
        "p1_p2_goodfit", p1_floor, P1,
        P2=P2, P2_floor=GOOD_FIT_P2, w_norm_bound_holds=bool(w_ok),
        kappa_fold=kappa_fold, cv_ratio=terms.E / y2,
    )
    report.satisfied = report.satisfied and w_ok and P2 >= GOOD_FIT_P2
    return report


def rank_kappa_bound(d: Dataset) -> BoundReport:
    """R/κ² <= N·M·‖X‖²_max/(N+M)² under the spectrum window λ <= N+M."""
    f = d.svd
    if f.rank == 0:
        return BoundReport.not_applicable("rank_kappa", "zero design matrix")
    if f.singular_values[0] > d.NM:
        return BoundReport.not_applicable(
            "rank_kappa", "largest singular value exceeds N+M", lambda_max=float(f.singular_values[0])
        )
    kappa = d.kappa_convention
    return BoundReport.upper(
        "rank_kappa", d.N * d.M * d.x_max ** 2 / d.NM ** 2, f.rank / kappa ** 2,
        rank=f.rank, kappa=kappa,
    )
