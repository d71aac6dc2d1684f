import math

import numpy as np
import pytest

import numkit
from hamsim import (
    DEFAULT_CHANNEL_SAFETY,
    ChannelConfig,
    calibrate_safety,
    channel_error,
    default_test_states,
    exact_conditional_output,
    parallel_sim_channel,
    random_hermitian_family,
    step_count,
)
from qridge_errors import ContractError, ResourceError
from qstates import OracleCounters

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]])


def _pure(v):
    v = np.asarray(v, dtype=complex)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


def test_zero_hamiltonians_leave_state_unchanged():
    sigma_c = _pure([1.0, 1.0])
    sigma = _pure([1.0, 2.0j])
    out = parallel_sim_channel([np.zeros((2, 2))] * 2, sigma_c, sigma, ChannelConfig(t=1.0, n=5))
    assert np.allclose(out.rho, np.kron(sigma_c, sigma), atol=1e-12)
    assert out.layout.names == ("control", "system")


def test_single_pauli_meets_target_with_step_count():
    eps = 0.05
    cfg = ChannelConfig.for_target(M_A=1.0, t=1.0, epsilon=eps)
    assert cfg.n == step_count(1.0, 1.0, eps, DEFAULT_CHANNEL_SAFETY)
    err, per_state = channel_error([0.5 * PAULI_X], cfg, default_test_states(1, 2, seed=0))
    assert len(per_state) == 5
    assert err <= eps


def test_superposed_control_off_diagonal_blocks():
    A1 = 0.8 * PAULI_X
    A2 = np.diag([0.6, -0.6])
    sigma_c = _pure([1.0, 1.0])
    sigma = _pure([1.0, 0.5])
    t, eps = 1.0, 0.05
    cfg = ChannelConfig.for_target(M_A=0.8, t=t, epsilon=eps)
    out = parallel_sim_channel([A1, A2], sigma_c, sigma, cfg)
    U1 = numkit.expm_hermitian(A1 / 2, t)
    U2 = numkit.expm_hermitian(A2 / 2, t)
    off = out.rho[:2, 2:]
    expected = 0.5 * U1 @ sigma @ U2.conj().T
    assert np.abs(off - expected).max() <= eps


def test_control_populations_preserved():
    A_list = random_hermitian_family(1, seed=4, Q_range=(3, 3), N_range=(2, 2))[0]
    sigma_c = _pure([1.0, 2.0, 0.5j])
    out = parallel_sim_channel(A_list, sigma_c, _pure([1.0, 1.0j]), ChannelConfig(t=1.0, n=7))
    control = out.reduce(["control"]).rho
    assert np.allclose(np.diag(control), np.diag(sigma_c), atol=1e-10)


def test_error_halves_when_steps_double():
    A_list = random_hermitian_family(1, seed=1, Q_range=(2, 2), N_range=(2, 2))[0]
    states = default_test_states(2, 2, seed=1)
    e1, _ = channel_error(A_list, ChannelConfig(t=1.0, n=20), states)
    e2, _ = channel_error(A_list, ChannelConfig(t=1.0, n=40), states)
    assert 1.6 < e1 / e2 < 2.4


def test_loglog_slope_near_one():
    A_list = random_hermitian_family(1, seed=6, Q_range=(2, 2), N_range=(2, 2))[0]
    states = default_test_states(2, 2, seed=6)[:3]
    ns = [10, 30, 100, 300]
    errs = [channel_error(A_list, ChannelConfig(t=1.0, n=n), states)[0] for n in ns]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    slope = np.polyfit([math.log(1.0 / n) for n in ns], [math.log(e) for e in errs], 1)[0]
    assert 0.7 <= slope <= 1.3


def test_channel_matches_exact_output_for_zero_time_step_limit():
    A_list = [0.3 * PAULI_X]
    sigma_c, sigma = default_test_states(1, 2)[0]
    out = parallel_sim_channel(A_list, sigma_c, sigma, ChannelConfig(t=0.2, n=200))
    ref = exact_conditional_output(A_list, sigma_c, sigma, 0.2)
    assert numkit.trace_distance(out.rho, ref) < 1e-4


def test_calibrated_safety_is_within_default():
    family = random_hermitian_family(4, seed=0)
    constant = calibrate_safety(family, t=1.0, n=16)
    assert 0.0 < constant <= DEFAULT_CHANNEL_SAFETY


def test_budget_and_invalid_states():
    A_list = [np.eye(4)] * 2
    sigma_c, sigma = default_test_states(2, 4)[0]
    with pytest.raises(ResourceError):
        parallel_sim_channel(A_list, sigma_c, sigma, ChannelConfig(t=1.0, n=1), budget=16)
    with pytest.raises(ContractError):
        parallel_sim_channel([PAULI_X], np.eye(1), np.diag([2.0, -1.0]), ChannelConfig(t=1.0, n=1))


def test_counters_record_steps():
    counters = OracleCounters()
    sigma_c, sigma = default_test_states(1, 2)[0]
    parallel_sim_channel([PAULI_X], sigma_c, sigma, ChannelConfig(t=1.0, n=9), counters=counters)
    assert counters.snapshot()["hamsim_steps"] == 9
