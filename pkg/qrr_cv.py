"""
Quantum K-fold cross-validation for choosing α, and the combined pipeline
that feeds the chosen α into the fitting-state preparation.

Every fold's model is encoded in one state over (index, feature) registers,
with the conditional evolution Σ_l Σ_{τ∈S_l} |τ><τ| ⊗ exp(-i X̃_{-l} t/(N+M))
applied exactly per fold. The parallel simulation channel is kept as a
separate cross-check.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

import numkit
from classical_ridge import (
    Dataset,
    FoldPartition,
    alpha_grid,
    argmin_with_tiebreak,
    cv_error_exact,
    default_alpha_range,
    fold_kappa_convention,
    masked_design,
    partition_folds,
    psi0_weight,
)
from hamsim import (
    ChannelConfig,
    channel_error,
    default_test_states,
    dilate,
    step_count,
    DEFAULT_CHANNEL_SAFETY,
)
from logic.fold_bounds import k_min_recommendation
from logic.spectral_bounds import h_max
from qcore import (
    amplitude_estimate,
    append_flag,
    controlled_rotation_h,
    estimate_norm_sq,
    inverse_phase_estimation,
    phase_estimation,
    postselect,
    prepare_psi0,
    project_register,
    restrict_register,
    signed_overlap_test,
    signed_window_scale,
    support_max_h,
    swap_test,
    zero_eigen_filter,
    zero_slot_weight,
)
from qridge_errors import ContractError, DegeneracyError, ImpossibleOutcomeError, InputError
from qrr_fit import C_HEADROOM, ZERO_WEIGHT_FLOOR, Alg1Config, Alg1Output, algorithm1_run
from qstates import NoiseModel, OracleCounters, PureState, RegisterLayout

logger = logging.getLogger(__name__)

P2_FLOOR_SLACK = 1e-10


@dataclass(frozen=True)
class Alg2Config:
    K: Optional[int] = None
    alphas: Optional[Tuple[float, ...]] = None
    L: int = 5
    s: int = 8
    C2: Optional[float] = None
    readout: str = "exact"
    t0: Optional[float] = None
    eps: float = 0.05
    noise: bool = False
    seed: Optional[int] = None

    @property
    def eps_y(self) -> float:
        return self.eps

    @property
    def eps_w(self) -> float:
        return self.eps / 3.0

    @property
    def eps_1(self) -> float:
        return self.eps / 3.0

    @property
    def eps_2(self) -> float:
        return self.eps / 6.0


@dataclass
class PsiW:
    psi_w: PureState
    P_w: float
    C2: float
    t0: float
    chain: Dict[str, float] = field(default_factory=dict)


@dataclass
class CvRow:
    alpha: float
    E1_est: float
    E2_est: float
    S3_est: float
    E_est: float
    P_w: float
    P1: float
    P2: float
    sign_of_S3: int
    E_exact: float
    E1_exact: float
    E2_exact: float
    S3_exact: float
    C2: float
    heuristic_agrees: bool
    mode: str

    def to_dict(self) -> Dict[str, object]:
        return dataclasses.asdict(self)


@dataclass
class CvEstimate:
    K: int
    rows: List[CvRow]
    alpha_hat_quantum: float
    index_quantum: int
    alpha_hat_classical: float
    index_classical: int
    counters: Dict[str, int] = field(default_factory=dict)

    @property
    def agree(self) -> bool:
        return self.index_quantum == self.index_classical


def resolve_K(d: Dataset, cfg: Alg2Config) -> int:
    recommended = k_min_recommendation(d)
    if cfg.K is None:
        return recommended
    if cfg.K < recommended:
        logger.warning("K=%d below recommended minimum %d", cfg.K, recommended)
    return int(cfg.K)


def resolve_alphas(d: Dataset, cfg: Alg2Config) -> List[float]:
    if cfg.alphas:
        return [float(a) for a in cfg.alphas]
    lo, hi = default_alpha_range(d)
    return alpha_grid(lo, hi, cfg.L)


def _fold_spectra(d: Dataset, p: FoldPartition):
    out = []
    for l in range(p.K):
        X_minus = masked_design(d, p, l).X_minus_l
        if not np.any(X_minus):
            raise DegeneracyError(f"X_-{l} is zero")
        out.append(dilate(X_minus).spectrum(1.0 / d.NM))
    return out


def algorithm2_psi_w(
    d: Dataset,
    p: FoldPartition,
    alpha: float,
    cfg: Alg2Config,
    counters: Optional[OracleCounters] = None,
) -> PsiW:
    """
    |ψ_w> ∝ Σ_l Σ_{τ∈S_l} |τ> ⊗ C2 (N+M) w_l together with
    P_w = Σ_l |S_l| C2²(N+M)²‖w_l‖² / Σ_l |S_l|‖y_{-l}‖².
    """
    if alpha <= 0:
        raise InputError(f"cross-validation needs alpha > 0, got {alpha}")
    counters = counters if counters is not None else OracleCounters()
    psi0 = prepare_psi0(d, p, counters)
    chain = {"prepare": psi0.probability}

    spectra = _fold_spectra(d, p)
    owner = p.fold_of()
    generators = [spectra[owner[tau]] for tau in range(d.N)]
    max_mu = max(float(np.max(np.abs(f.eigenvalues))) for f in spectra)
    t0 = cfg.t0 or signed_window_scale(max_mu, cfg.s)
    state, record = phase_estimation(generators, t0, psi0.post_state, cfg.s, target="system",
                                     control="index", readout=cfg.readout, counters=counters)

    filter_prob = 1.0
    if zero_slot_weight(record) > ZERO_WEIGHT_FLOOR:
        filtered = zero_eigen_filter(state, record, counters=counters)
        state, filter_prob = filtered.post_state, filtered.probability
    chain["zero_filter"] = filter_prob

    if cfg.C2:
        C2 = float(cfg.C2)
    else:
        closed = max(h_max(d.NM, fold_kappa_convention(d, p, l), alpha) for l in range(p.K))
        C2 = C_HEADROOM / max(closed, support_max_h(record, alpha, d.NM, state))
    logger.debug("algorithm2 alpha=%g t0=%.6g C2=%.6g", alpha, t0, C2)

    state = controlled_rotation_h(state, record, alpha, C2, d.NM)
    flag = postselect(state, "flag", 1, counters)
    chain["flag"] = flag.probability
    back = inverse_phase_estimation(flag.post_state, record, counters)
    chain["uncompute"] = back.probability
    vpart = restrict_register(back.post_state, "system", range(d.N, d.NM), "feature", counters)
    chain["v_part"] = vpart.probability
    return PsiW(psi_w=vpart.post_state, P_w=filter_prob * flag.probability, C2=C2, t0=t0, chain=chain)


def algorithm2_yhat(
    psi_w: PureState,
    d: Dataset,
    p: FoldPartition,
    counters: Optional[OracleCounters] = None,
) -> Tuple[PureState, float]:
    """
    |ŷ> ∝ Σ_τ (x_τᵀ w_{l(τ)}) |τ> with
    P1 = Σ_τ (x_τᵀ w_{l(τ)})² / (M ‖X‖²_max Σ_l |S_l| ‖w_l‖²).
    """
    if psi_w.layout.names != ("index", "feature"):
        raise InputError(f"expected (index, feature) registers, got {psi_w.layout.names}")
    counters = counters if counters is not None else OracleCounters()
    # O_X loads x_τk, the rotation writes x_τk/‖X‖_max, O_X⁻¹ clears the data register
    state = append_flag(psi_w, ["index", "feature"], d.X / d.x_max, "xflag")
    counters.add("O_X", 1)
    counters.add("O_X_inv", 1)
    try:
        hit = postselect(state, "xflag", 1, counters)
        proj = project_register(hit.post_state, "feature", np.ones(d.M), counters)
    except ImpossibleOutcomeError:
        raise DegeneracyError("every held-out prediction is zero") from None
    return proj.post_state, hit.probability * proj.probability


def _y_state(d: Dataset) -> PureState:
    return PureState.from_vector(d.y, RegisterLayout.of(("index", d.N)))


def estimate_E_terms(
    d: Dataset,
    p: FoldPartition,
    alpha: float,
    cfg: Alg2Config,
    counters: Optional[OracleCounters] = None,
    noise: Optional[NoiseModel] = None,
) -> CvRow:
    counters = counters if counters is not None else OracleCounters()
    noise = noise if noise is not None else NoiseModel(cfg.seed, enabled=cfg.noise)

    E1_est = estimate_norm_sq(d.y, cfg.eps_y, noise)
    pw = algorithm2_psi_w(d, p, alpha, cfg, counters)
    yhat, P1 = algorithm2_yhat(pw.psi_w, d, p, counters)
    y_state = _y_state(d)
    P2 = swap_test(y_state, yhat)
    if P2 < 0.5 - P2_FLOOR_SLACK:
        raise ContractError(f"swap-test probability {P2:.12f} below 1/2")

    P_w_est, _ = amplitude_estimate(pw.P_w, cfg.eps_w, noise)
    P1_est, _ = amplitude_estimate(P1, cfg.eps_1, noise)
    P2_est, _ = amplitude_estimate(P2, cfg.eps_2, noise)
    P2_est = min(max(P2_est, 0.5), 1.0)

    fw = psi0_weight(d, p)
    C2 = pw.C2
    scale = d.M * d.x_max ** 2 * fw / (C2 * C2 * d.NM ** 2)
    E2_est = P1_est * P_w_est * scale * E1_est
    overlap = signed_overlap_test(y_state, _real(yhat))
    sign = 1 if overlap >= 0 else -1
    S3_est = sign * math.sqrt(max(2.0 * P2_est - 1.0, 0.0) * P1_est * P_w_est * scale) * E1_est
    heuristic_agrees = sign > 0
    if not heuristic_agrees:
        logger.warning("alpha=%g: held-out predictions anti-correlate with y (S3 < 0)", alpha)
    E_est = E1_est + E2_est - 2.0 * S3_est

    exact = cv_error_exact(d, p, alpha)
    return CvRow(
        alpha=float(alpha),
        E1_est=E1_est, E2_est=E2_est, S3_est=S3_est, E_est=E_est,
        P_w=P_w_est, P1=P1_est, P2=P2_est, sign_of_S3=sign,
        E_exact=exact.E, E1_exact=exact.E1, E2_exact=exact.E2, S3_exact=exact.S3,
        C2=C2, heuristic_agrees=heuristic_agrees,
        mode="noise" if noise.enabled else "exact",
    )


def _real(state: PureState) -> PureState:
    if numkit.max_abs(state.amplitudes.imag) > 1e-9:
        return state
    return PureState.from_vector(state.amplitudes.real, state.layout)


def select_alpha_quantum(
    d: Dataset,
    p: FoldPartition,
    cfg: Alg2Config,
    counters: Optional[OracleCounters] = None,
    noise: Optional[NoiseModel] = None,
) -> CvEstimate:
    counters = counters if counters is not None else OracleCounters()
    noise = noise if noise is not None else NoiseModel(cfg.seed, enabled=cfg.noise)
    alphas = resolve_alphas(d, cfg)
    rows = [estimate_E_terms(d, p, a, cfg, counters, noise) for a in alphas]
    iq = argmin_with_tiebreak([r.E_est for r in rows])
    ic = argmin_with_tiebreak([r.E_exact for r in rows])
    return CvEstimate(
        K=p.K, rows=rows,
        alpha_hat_quantum=alphas[iq], index_quantum=iq,
        alpha_hat_classical=alphas[ic], index_classical=ic,
        counters=counters.snapshot(),
    )


def whole_pipeline(
    d: Dataset,
    cfg2: Alg2Config,
    cfg1: Alg1Config,
    counters: Optional[OracleCounters] = None,
) -> Tuple[float, Alg1Output, CvEstimate]:
    """Choose α by quantum cross-validation, then prepare the fitting state at that α."""
    counters = counters if counters is not None else OracleCounters()
    noise = NoiseModel(cfg2.seed, enabled=cfg2.noise or cfg1.noise)
    p = partition_folds(d.N, resolve_K(d, cfg2))
    cv = select_alpha_quantum(d, p, cfg2, counters, noise)
    out = algorithm1_run(d, dataclasses.replace(cfg1, alpha=cv.alpha_hat_quantum), counters, noise)
    return cv.alpha_hat_quantum, out, cv


def conditional_evolution_cross_check(
    d: Dataset,
    p: FoldPartition,
    t: float,
    epsilon: float,
    safety: float = DEFAULT_CHANNEL_SAFETY,
    seed: int = 0,
    max_states: int = 3,
) -> Tuple[float, int]:
    """
    Trace distance between the parallel simulation channel and the exact
    fold-conditional evolution Σ_l |l><l| ⊗ exp(-i X̃_{-l} t/(N+M)).

    Returns:
        (max trace distance over test states, channel step count)
    """
    A_list = [dilate(masked_design(d, p, l).X_minus_l).Xt for l in range(p.K)]
    M_A = numkit.max_abs(np.stack(A_list))
    n = step_count(M_A, t, epsilon, safety)
    states = default_test_states(p.K, d.NM, seed)[:max_states]
    err, _ = channel_error(A_list, ChannelConfig(t=t, n=n, epsilon_target=epsilon), states)
    return err, n
