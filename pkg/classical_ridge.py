"""
Exact classical ridge regression and K-fold cross-validation.

These functions are the ground truth every quantum estimate in the lab is
compared against. All sums over folds are accumulated left to right in fold
order so results do not depend on how callers schedule the work.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

import numkit
from qridge_errors import ContractError, DegeneracyError, InputError

logger = logging.getLogger(__name__)

CV_FORM_RTOL = 1e-10
TIE_RTOL = 1e-12


# ---------------------------------------------------------------------------
# 1. Data containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float, copy=True)
        y = np.array(self.y, dtype=float, copy=True).reshape(-1)
        if X.ndim != 2:
            raise InputError(f"design matrix must be 2-D, got shape {X.shape}")
        if X.shape[0] < 2 or X.shape[1] < 1:
            raise InputError(f"need N >= 2 rows and M >= 1 columns, got {X.shape}")
        if y.shape[0] != X.shape[0]:
            raise InputError(f"y has {y.shape[0]} entries but X has {X.shape[0]} rows")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise InputError("dataset contains non-finite entries")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def N(self) -> int:
        return int(self.X.shape[0])

    @property
    def M(self) -> int:
        return int(self.X.shape[1])

    @property
    def NM(self) -> int:
        """N + M, the dilation dimension."""
        return self.N + self.M

    @cached_property
    def svd(self) -> numkit.SvdFactors:
        return numkit.svd(self.X)

    @property
    def rank(self) -> int:
        return self.svd.rank

    @property
    def kappa(self) -> float:
        if self.rank == 0:
            raise DegeneracyError("design matrix is zero; condition number undefined")
        s = self.svd.singular_values
        return float(s[0] / s[-1])

    @property
    def kappa_convention(self) -> float:
        """κ placing the spectrum in [(N+M)/κ, N+M]; at least the true κ."""
        if self.rank == 0:
            raise DegeneracyError("design matrix is zero; condition number undefined")
        return float(max(self.NM / self.svd.singular_values[-1], self.kappa))

    @property
    def x_max(self) -> float:
        return numkit.max_abs(self.X)

    @property
    def y_max(self) -> float:
        return numkit.max_abs(self.y)

    @property
    def y_norm_sq(self) -> float:
        return float(self.y @ self.y)

    def beta(self) -> np.ndarray:
        """β_j = <u_j|y>/‖y‖ over the rank support."""
        norm = np.sqrt(self.y_norm_sq)
        if norm == 0.0:
            return np.zeros(self.rank)
        return self.svd.left_vectors.T @ self.y / norm

    def metadata(self) -> Dict[str, float]:
        """Recompute scale metadata from scratch."""
        f = numkit.svd(self.X)
        out = {
            "N": self.N,
            "M": self.M,
            "rank": f.rank,
            "x_max": numkit.max_abs(self.X),
            "y_max": numkit.max_abs(self.y),
        }
        if f.rank:
            out["kappa"] = float(f.singular_values[0] / f.singular_values[-1])
        return out


@dataclass
class RidgeSolution:
    alpha: float
    w: np.ndarray
    residual_sum: float
    zero_output: bool = False


@dataclass(frozen=True)
class FoldPartition:
    N: int
    K: int
    folds: Tuple[Tuple[int, ...], ...]

    def fold_of(self) -> np.ndarray:
        """Fold index for every data row."""
        owner = np.empty(self.N, dtype=int)
        for l, rows in enumerate(self.folds):
            owner[list(rows)] = l
        return owner

    def sizes(self) -> List[int]:
        return [len(rows) for rows in self.folds]


class FoldSplit(NamedTuple):
    X_l: np.ndarray
    X_minus_l: np.ndarray
    y_l: np.ndarray
    y_minus_l: np.ndarray


class CvTerms(NamedTuple):
    E: float
    E1: float
    E2: float
    S3: float


@dataclass
class CvCurve:
    alphas: List[float]
    E_values: List[float]
    E1: float
    E2: List[float]
    S3: List[float]
    argmin_index: int = field(default=0)


# ---------------------------------------------------------------------------
# 2. Ridge solvers
# ---------------------------------------------------------------------------


def _residual(d: Dataset, w: np.ndarray) -> float:
    r = d.X @ w - d.y
    return float(r @ r)


def _check_alpha(alpha: float, strict: bool = False) -> float:
    alpha = float(alpha)
    if not np.isfinite(alpha) or alpha < 0.0 or (strict and alpha == 0.0):
        bound = "> 0" if strict else ">= 0"
        raise InputError(f"alpha must be finite and {bound}, got {alpha}")
    return alpha


def solve_ridge_normal(d: Dataset, alpha: float) -> RidgeSolution:
    alpha = _check_alpha(alpha)
    if alpha == 0.0 and d.rank < d.M:
        raise DegeneracyError(
            f"normal equations singular at alpha=0: rank {d.rank} < M={d.M}"
        )
    gram = d.X.T @ d.X + alpha * np.eye(d.M)
    w = scipy.linalg.solve(gram, d.X.T @ d.y, assume_a="pos")
    return RidgeSolution(alpha=alpha, w=w, residual_sum=_residual(d, w))


def _spectral_filter(s: np.ndarray, alpha: float) -> np.ndarray:
    return s / (s * s + alpha)


def solve_ridge_svd(d: Dataset, alpha: float) -> RidgeSolution:
    alpha = _check_alpha(alpha)
    f = d.svd
    if d.y_norm_sq == 0.0:
        w = np.zeros(d.M)
        return RidgeSolution(alpha=alpha, w=w, residual_sum=0.0, zero_output=True)
    coeff = _spectral_filter(f.singular_values, alpha) * (f.left_vectors.T @ d.y)
    w = f.right_vectors @ coeff
    return RidgeSolution(alpha=alpha, w=w, residual_sum=_residual(d, w))


def ridge_path(d: Dataset, alphas: Sequence[float]) -> np.ndarray:
    """
    Ridge weights for a whole α grid from one SVD.

    Returns:
        array of shape (len(alphas), M)
    """
    alphas = np.asarray([_check_alpha(a) for a in alphas], dtype=float)
    f = d.svd
    uty = f.left_vectors.T @ d.y
    s = f.singular_values
    filt = s[None, :] / (s[None, :] ** 2 + alphas[:, None])
    return (filt * uty[None, :]) @ f.right_vectors.T


def predictive_error_bound(d: Dataset, alpha: float) -> Tuple[float, float, float]:
    """
    Training-error sum against its spectral lower bound.

    Returns:
        (error_sum, lower_bound, Lambda), Lambda = max_j λ_j²/(λ_j²+α)
    """
    alpha = _check_alpha(alpha, strict=True)
    sol = solve_ridge_svd(d, alpha)
    y2 = d.y_norm_sq
    s2 = d.svd.singular_values ** 2
    lam = float(np.max(s2 / (s2 + alpha))) if s2.size else 0.0
    beta_sq = float(np.sum(d.beta() ** 2))
    lower = y2 * (1.0 - lam * (2.0 - lam) * beta_sq)
    if sol.residual_sum < lower - 1e-9 * max(1.0, y2):
        raise ContractError(
            f"predictive error {sol.residual_sum:.6e} below bound {lower:.6e}"
        )
    return sol.residual_sum, lower, lam


# ---------------------------------------------------------------------------
# 3. Folds
# ---------------------------------------------------------------------------


def partition_folds(N: int, K: int) -> FoldPartition:
    """Contiguous folds of size N//K; the last fold absorbs the remainder."""
    N, K = int(N), int(K)
    if not 2 <= K <= N:
        raise InputError(f"need 2 <= K <= N, got K={K}, N={N}")
    base = N // K
    folds = []
    for l in range(K):
        start = l * base
        stop = N if l == K - 1 else start + base
        folds.append(tuple(range(start, stop)))
    return FoldPartition(N=N, K=K, folds=tuple(folds))


def _check_fold(p: FoldPartition, l: int) -> Tuple[int, ...]:
    if not 0 <= l < p.K:
        raise InputError(f"fold index {l} outside 0..{p.K - 1}")
    return p.folds[l]


def masked_design(d: Dataset, p: FoldPartition, l: int) -> FoldSplit:
    if p.N != d.N:
        raise InputError(f"partition built for N={p.N}, dataset has N={d.N}")
    rows = list(_check_fold(p, l))
    X_minus = np.array(d.X, copy=True)
    y_minus = np.array(d.y, copy=True)
    X_minus[rows] = 0.0
    y_minus[rows] = 0.0
    return FoldSplit(
        X_l=d.X[rows].copy(),
        X_minus_l=X_minus,
        y_l=d.y[rows].copy(),
        y_minus_l=y_minus,
    )


def fold_solution(d: Dataset, p: FoldPartition, l: int, alpha: float) -> RidgeSolution:
    alpha = _check_alpha(alpha, strict=True)
    split = masked_design(d, p, l)
    Xm, ym = split.X_minus_l, split.y_minus_l
    gram = Xm.T @ Xm + alpha * np.eye(d.M)
    w = scipy.linalg.solve(gram, Xm.T @ ym, assume_a="pos")
    r = Xm @ w - ym
    return RidgeSolution(alpha=alpha, w=w, residual_sum=float(r @ r))


def psi0_weight(d: Dataset, p: FoldPartition) -> float:
    """Σ_l |S_l|·‖y_{-l}‖² / ‖y‖²; equals N(K-1)/K when K divides N."""
    y2 = d.y_norm_sq
    if y2 == 0.0:
        raise InputError("y is the zero vector")
    total = 0.0
    for rows in p.folds:
        yl = d.y[list(rows)]
        total += len(rows) * (y2 - float(yl @ yl))
    return total / y2


def cv_error_exact(d: Dataset, p: FoldPartition, alpha: float) -> CvTerms:
    E1 = E2 = S3 = E = 0.0
    for l in range(p.K):
        split = masked_design(d, p, l)
        w = fold_solution(d, p, l, alpha).w
        pred = split.X_l @ w
        r = split.y_l - pred
        E1 += float(split.y_l @ split.y_l)
        E2 += float(pred @ pred)
        S3 += float(split.y_l @ pred)
        E += float(r @ r)
    assembled = E1 + E2 - 2.0 * S3
    if abs(assembled - E) > CV_FORM_RTOL * max(E, E1, 1e-300):
        raise ContractError(
            f"CV error forms disagree: direct {E:.12e} vs assembled {assembled:.12e}"
        )
    return CvTerms(E=E, E1=E1, E2=E2, S3=S3)


# ---------------------------------------------------------------------------
# 4. α grid and selection
# ---------------------------------------------------------------------------


def alpha_grid(alpha_min: float, alpha_max: float, L: int) -> List[float]:
    L = int(L)
    if L < 1:
        raise InputError(f"grid size L must be >= 1, got {L}")
    if not (np.isfinite(alpha_min) and alpha_min > 0.0):
        raise InputError(f"alpha_min must be > 0, got {alpha_min}")
    if L == 1:
        logger.warning("alpha_grid called with L=1; using alpha_min=%g only", alpha_min)
        return [float(alpha_min)]
    if not (np.isfinite(alpha_max) and alpha_max > alpha_min):
        raise InputError(f"need alpha_min < alpha_max, got {alpha_min}, {alpha_max}")
    grid = np.linspace(float(alpha_min), float(alpha_max), L)
    grid[0], grid[-1] = float(alpha_min), float(alpha_max)
    return [float(a) for a in grid]


def default_alpha_range(d: Dataset) -> Tuple[float, float]:
    nm2 = float(d.NM) ** 2
    return nm2 / (10.0 * d.kappa ** 2), nm2 / 2.0


def argmin_with_tiebreak(values: Sequence[float]) -> int:
    """Index of the minimum; near-ties go to the later (larger α) entry."""
    if len(values) == 0:
        raise InputError("cannot select from an empty curve")
    best = 0
    for j in range(1, len(values)):
        if values[j] < values[best] or np.isclose(values[j], values[best], rtol=TIE_RTOL, atol=0.0):
            best = j
    return best


def cv_curve_exact(d: Dataset, p: FoldPartition, alphas: Sequence[float]) -> CvCurve:
    E_values, E2, S3 = [], [], []
    E1 = 0.0
    for alpha in alphas:
        terms = cv_error_exact(d, p, alpha)
        logger.debug("cv alpha=%g E=%.6e", alpha, terms.E)
        E_values.append(terms.E)
        E2.append(terms.E2)
        S3.append(terms.S3)
        E1 = terms.E1
    curve = CvCurve(alphas=[float(a) for a in alphas], E_values=E_values, E1=E1, E2=E2, S3=S3)
    curve.argmin_index = argmin_with_tiebreak(E_values)
    return curve


def select_alpha(curve: CvCurve) -> Tuple[float, int]:
    idx = argmin_with_tiebreak(curve.E_values)
    return curve.alphas[idx], idx


def balancedness(y) -> float:
    y = np.asarray(y, dtype=float).reshape(-1)
    peak = numkit.max_abs(y)
    if peak == 0.0:
        raise InputError("balancedness of the zero vector is undefined")
    return float(y @ y) / (y.size * peak * peak)


def fold_kappa_convention(d: Dataset, p: FoldPartition, l: int) -> float:
    """κ' for fold l: (N+M) over the smallest nonzero singular value of X_{-l}."""
    f = numkit.svd(masked_design(d, p, l).X_minus_l)
    if f.rank == 0:
        raise DegeneracyError(f"X_-{l} is zero")
    return float(max(d.NM / f.singular_values[-1], f.singular_values[0] / f.singular_values[-1]))


def fold_rank(d: Dataset, p: FoldPartition, l: int) -> int:
    """Numerical rank of X_{-l}."""
    return numkit.svd(masked_design(d, p, l).X_minus_l).rank
