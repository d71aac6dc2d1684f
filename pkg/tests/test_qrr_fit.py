import logging

import numpy as np
import pytest

from classical_ridge import Dataset, solve_ridge_svd
from dataset_io import reference_family
from qrr_fit import (
    Alg1Config,
    algorithm1_run,
    alpha_window,
    estimate_w_norm,
    predict,
    predict_batch,
)
from qridge_errors import DegeneracyError, InputError
from qstates import NoiseModel, OracleCounters


def _scalar_instance():
    # X = 2 e_1 in a 2x1 design: dilation eigenvalues ±2 plus one kernel direction
    return Dataset([[2.0], [0.0]], [1.0, 0.0])


def _alpha(d):
    return float(d.NM) ** 2 / (4.0 * d.kappa ** 2)


def test_scalar_instance_closed_form():
    d = _scalar_instance()
    alpha = 2.0
    cfg = Alg1Config(alpha=alpha, s=6)
    out = algorithm1_run(d, cfg)
    assert abs(out.fidelity - 1.0) < 1e-10
    h = 3 * 2.0 / (4.0 + alpha)
    assert abs(out.success_prob - out.C1 ** 2 * h ** 2) < 1e-10
    assert abs(out.flag_prob - out.C1 ** 2 * h ** 2) < 1e-10
    w = solve_ridge_svd(d, alpha).w
    assert abs(estimate_w_norm(out, d, cfg) - float(w @ w)) < 1e-10
    assert abs(out.w_norm_sq_est - float(w @ w)) < 1e-10


def test_equal_singular_values_give_gradient_direction():
    X = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]) * 3.0
    d = Dataset(X, [1.0, -2.0, 0.5])
    grad = X.T @ d.y
    for alpha in (1.0, 7.0):
        out = algorithm1_run(d, Alg1Config(alpha=alpha, s=6, readout="exact"))
        assert abs(abs(np.vdot(grad / np.linalg.norm(grad), out.phi_w.amplitudes)) - 1.0) < 1e-10


def test_exact_readout_matches_classical_on_random_instances():
    for d in reference_family(4, seed=11):
        alpha = _alpha(d)
        cfg = Alg1Config(alpha=alpha, readout="exact")
        out = algorithm1_run(d, cfg)
        w = solve_ridge_svd(d, alpha).w
        assert abs(out.fidelity - 1.0) < 1e-10
        assert abs(estimate_w_norm(out, d, cfg) - w @ w) <= 1e-8 * (w @ w)
        # the flag chain multiplies out to the reported success probability
        chain = out.chain
        assert abs(out.success_prob - chain["zero_filter"] * chain["flag"] * chain["uncompute"] * chain["v_part"]) < 1e-12
        assert 0.0 < out.success_prob <= 1.0


def test_qft_readout_fidelity_at_ten_bits():
    family = reference_family(5, seed=3)
    fids = [algorithm1_run(d, Alg1Config(alpha=_alpha(d), s=10)).fidelity for d in family]
    assert np.median(fids) >= 0.99


def test_median_fidelity_nondecreasing_in_phase_bits():
    family = reference_family(5, seed=21)
    medians = []
    for s in (4, 6, 8, 10):
        medians.append(np.median([algorithm1_run(d, Alg1Config(alpha=_alpha(d), s=s)).fidelity for d in family]))
    assert all(b >= a - 1e-9 for a, b in zip(medians, medians[1:]))


def test_noise_mode_norm_within_declared_error():
    d = reference_family(1, seed=2)[0]
    alpha = _alpha(d)
    w = solve_ridge_svd(d, alpha).w
    for seed in range(10):
        cfg = Alg1Config(alpha=alpha, readout="exact", noise=True, seed=seed, eps=0.06)
        out = algorithm1_run(d, cfg)
        # (1 ± ε/3)² bounds the product of the two injected factors
        assert abs(out.w_norm_sq_est - w @ w) <= ((1 + cfg.eps / 3) ** 2 - 1) * (w @ w) + 1e-12


def test_scaling_y_keeps_direction_and_scales_norm():
    d = reference_family(1, seed=4)[0]
    alpha = _alpha(d)
    base = algorithm1_run(d, Alg1Config(alpha=alpha, readout="exact"))
    scaled = algorithm1_run(Dataset(d.X, 3.0 * d.y), Alg1Config(alpha=alpha, readout="exact"))
    assert abs(abs(np.vdot(base.phi_w.amplitudes, scaled.phi_w.amplitudes)) - 1.0) < 1e-9
    assert abs(scaled.w_norm_sq_est - 9.0 * base.w_norm_sq_est) <= 1e-9 * scaled.w_norm_sq_est


def test_large_alpha_shrinks_norm_estimate(caplog):
    d = reference_family(1, seed=5)[0]
    with caplog.at_level(logging.WARNING):
        out = algorithm1_run(d, Alg1Config(alpha=1e8, readout="exact"))
    assert not out.alpha_in_window
    assert "outside recommended window" in caplog.text
    assert out.w_norm_sq_est < 1e-10


def test_predictions_match_classical():
    d = reference_family(1, seed=6)[0]
    alpha = _alpha(d)
    out = algorithm1_run(d, Alg1Config(alpha=alpha, readout="exact"))
    w = solve_ridge_svd(d, alpha).w
    assert abs(predict(out, 2.5 * w) - 2.5 * (w @ w)) < 1e-8
    assert np.allclose(predict_batch(out, d.X), d.X @ w, atol=1e-6)
    # a direction orthogonal to w predicts zero
    ortho = np.linalg.svd(w.reshape(1, -1))[2][1]
    assert abs(predict(out, ortho)) < 1e-8
    with pytest.raises(InputError):
        predict(out, np.zeros(d.M))


def test_counters_grow_with_phase_bits():
    d = _scalar_instance()
    small, large = OracleCounters(), OracleCounters()
    algorithm1_run(d, Alg1Config(alpha=2.0, s=4), small)
    algorithm1_run(d, Alg1Config(alpha=2.0, s=6), large)
    assert small.snapshot()["hamsim_steps"] == 2 * (2 ** 4 - 1)
    assert large.snapshot()["hamsim_steps"] == 2 * (2 ** 6 - 1)
    assert large.snapshot()["O_y"] == 2


def test_input_errors():
    d = _scalar_instance()
    with pytest.raises(InputError):
        algorithm1_run(d, Alg1Config(alpha=None))
    with pytest.raises(InputError):
        algorithm1_run(Dataset(d.X, [0.0, 0.0]), Alg1Config(alpha=1.0))
    # y orthogonal to the column space
    with pytest.raises(DegeneracyError):
        algorithm1_run(Dataset(d.X, [0.0, 1.0]), Alg1Config(alpha=1.0, readout="exact"))


def test_alpha_window():
    d = _scalar_instance()
    lo, hi = alpha_window(d)
    assert abs(lo - 0.9) < 1e-12 and abs(hi - 9.0) < 1e-12
