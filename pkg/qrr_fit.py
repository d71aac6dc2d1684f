"""
Optimal-fitting-parameter state preparation, norm estimation and prediction.

Pipeline on the dilated register of dimension N+M:

    1) amplitude-encode |0, y>
    2) phase-estimate X̃/(N+M), filtering decoded zeros when y leaves the column space
    3) rotate a flag qubit by C1·h(λ̂, α)
    4) keep flag = 1, uncompute the eigenvalue register, keep the v-part
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

import numkit
from classical_ridge import Dataset, solve_ridge_svd
from hamsim import dilate
from logic.spectral_bounds import h_max
from qcore import (
    amplitude_amplify_count,
    amplitude_estimate,
    controlled_rotation_h,
    estimate_norm_sq,
    inverse_phase_estimation,
    phase_estimation,
    postselect,
    prepare_amplitude_state,
    restrict_register,
    signed_overlap_test,
    signed_window_scale,
    support_max_h,
    zero_eigen_filter,
    zero_slot_weight,
)
from qridge_errors import InputError
from qstates import NoiseModel, OracleCounters, PureState, RegisterLayout

logger = logging.getLogger(__name__)

C_HEADROOM = 0.99
ZERO_WEIGHT_FLOOR = 1e-12


@dataclass(frozen=True)
class Alg1Config:
    alpha: Optional[float] = None
    s: int = 8
    C1: Optional[float] = None
    exact_prep: bool = True
    readout: str = "qft"
    t0: Optional[float] = None
    eps: float = 0.05
    noise: bool = False
    seed: Optional[int] = None

    @property
    def eps_y(self) -> float:
        return self.eps / 3.0

    @property
    def eps_w(self) -> float:
        return self.eps / 3.0


@dataclass
class Alg1Output:
    phi_w: PureState
    success_prob: float
    flag_prob: float
    w_norm_sq_est: float
    counters: Dict[str, int]
    fidelity: float
    C1: float
    t0: float
    alpha: float
    alpha_in_window: bool
    amplification_reps: int
    estimation_reps: int
    chain: Dict[str, float] = field(default_factory=dict)

    @property
    def fidelity_vs_classical(self) -> float:
        return self.fidelity

    def summary(self) -> Dict[str, object]:
        return {
            "alpha": self.alpha,
            "alpha_in_window": self.alpha_in_window,
            "C1": self.C1,
            "t0": self.t0,
            "success_prob": self.success_prob,
            "flag_prob": self.flag_prob,
            "w_norm_sq_est": self.w_norm_sq_est,
            "fidelity": self.fidelity,
            "amplification_reps": self.amplification_reps,
            "estimation_reps": self.estimation_reps,
            "chain": dict(self.chain),
            "counters": dict(self.counters),
        }


def alpha_window(d: Dataset) -> tuple:
    nm2 = float(d.NM) ** 2
    return nm2 / (10.0 * d.kappa ** 2), nm2


def auto_scale_constant(n_plus_m: float, kappa: float, alpha: float, support_max: float) -> float:
    """0.99 over the larger of the closed-form h bound and the populated-support maximum."""
    return C_HEADROOM / max(h_max(n_plus_m, kappa, alpha), support_max)


def algorithm1_run(
    d: Dataset,
    cfg: Alg1Config,
    counters: Optional[OracleCounters] = None,
    noise: Optional[NoiseModel] = None,
) -> Alg1Output:
    if cfg.alpha is None or cfg.alpha <= 0:
        raise InputError(f"the fitting state needs alpha > 0, got {cfg.alpha}")
    if d.y_norm_sq == 0.0:
        raise InputError("y is the zero vector")
    alpha = float(cfg.alpha)
    counters = counters if counters is not None else OracleCounters()
    noise = noise if noise is not None else NoiseModel(cfg.seed, enabled=cfg.noise)

    lo, hi = alpha_window(d)
    in_window = lo <= alpha <= hi
    if not in_window:
        logger.warning("alpha=%g outside recommended window [%g, %g]", alpha, lo, hi)

    # 1) |0, y>
    prep = prepare_amplitude_state(d.y, exact=cfg.exact_prep, counters=counters, pad_to=d.NM)
    chain = {"prepare": prep.probability}

    # 2) phase estimation on X̃/(N+M)
    spectrum = dilate(d.X).spectrum(1.0 / d.NM)
    t0 = cfg.t0 or signed_window_scale(float(np.max(np.abs(spectrum.eigenvalues))), cfg.s)
    state, record = phase_estimation(spectrum, t0, prep.post_state, cfg.s,
                                     readout=cfg.readout, counters=counters)
    filter_prob = 1.0
    if zero_slot_weight(record) > ZERO_WEIGHT_FLOOR:
        filtered = zero_eigen_filter(state, record, counters=counters)
        state, filter_prob = filtered.post_state, filtered.probability
    chain["zero_filter"] = filter_prob

    # 3) flag rotation
    C1 = cfg.C1 or auto_scale_constant(d.NM, d.kappa_convention, alpha,
                                       support_max_h(record, alpha, d.NM, state))
    logger.debug("algorithm1 alpha=%g t0=%.6g C1=%.6g", alpha, t0, C1)
    state = controlled_rotation_h(state, record, alpha, C1, d.NM)

    # 4) flag, uncompute, v-part
    flag = postselect(state, "flag", 1, counters)
    chain["flag"] = flag.probability
    back = inverse_phase_estimation(flag.post_state, record, counters)
    chain["uncompute"] = back.probability
    vpart = restrict_register(back.post_state, "system", range(d.N, d.NM), "feature", counters)
    chain["v_part"] = vpart.probability

    flag_prob = filter_prob * flag.probability
    success = flag_prob * back.probability * vpart.probability
    p_est, est_reps = amplitude_estimate(flag_prob, cfg.eps_w, noise)
    y2_est = estimate_norm_sq(d.y, cfg.eps_y, noise)
    w_norm_sq = p_est * y2_est / (C1 * C1 * d.NM ** 2)

    phi_w = vpart.post_state
    fidelity = _fidelity(phi_w, solve_ridge_svd(d, alpha).w)
    return Alg1Output(
        phi_w=phi_w,
        success_prob=success,
        flag_prob=flag_prob,
        w_norm_sq_est=w_norm_sq,
        counters=counters.snapshot(),
        fidelity=fidelity,
        C1=C1,
        t0=t0,
        alpha=alpha,
        alpha_in_window=in_window,
        amplification_reps=amplitude_amplify_count(success),
        estimation_reps=est_reps,
        chain=chain,
    )


def _fidelity(phi: PureState, w: np.ndarray) -> float:
    norm = float(np.linalg.norm(w))
    if norm == 0.0:
        return 0.0
    return float(abs(np.vdot(w / norm, phi.amplitudes)) ** 2)


def estimate_w_norm(out: Alg1Output, d: Dataset, cfg: Alg1Config,
                    noise: Optional[NoiseModel] = None) -> float:
    """‖w‖² ≈ P·‖y‖² / (C1² (N+M)²) from a fresh pair of estimates."""
    noise = noise if noise is not None else NoiseModel(cfg.seed, enabled=cfg.noise)
    p_est, _ = amplitude_estimate(out.flag_prob, cfg.eps_w, noise)
    y2 = estimate_norm_sq(d.y, cfg.eps_y, noise)
    return p_est * y2 / (out.C1 ** 2 * d.NM ** 2)


def predict(out: Alg1Output, x_new) -> float:
    """wᵀx from the signed overlap of |x̃> with |φ_w>, rescaled by ‖x‖·√‖w‖²_est."""
    x = np.asarray(x_new, dtype=float).reshape(-1)
    if x.size != out.phi_w.dim:
        raise InputError(f"x_new has {x.size} entries, model has {out.phi_w.dim} features")
    norm = float(np.linalg.norm(x))
    if norm == 0.0:
        raise InputError("cannot predict at the zero vector")
    x_state = PureState(x / norm, RegisterLayout.of(("feature", x.size)))
    overlap = signed_overlap_test(x_state, _real_part(out.phi_w))
    return overlap * norm * math.sqrt(max(out.w_norm_sq_est, 0.0))


def predict_batch(out: Alg1Output, X_rows) -> np.ndarray:
    X_rows = np.atleast_2d(np.asarray(X_rows, dtype=float))
    return np.array([predict(out, row) if np.any(row) else 0.0 for row in X_rows])


def _real_part(state: PureState) -> PureState:
    """Drop imaginary rounding noise left by the kernel phases."""
    amps = state.amplitudes
    if numkit.max_abs(amps.imag) > 1e-9 * max(1.0, numkit.max_abs(amps)):
        return state
    return PureState.from_vector(amps.real, state.layout)
