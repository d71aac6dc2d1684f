import logging

import numpy as np
import pytest

from classical_ridge import (
    Dataset,
    alpha_grid,
    argmin_with_tiebreak,
    balancedness,
    cv_curve_exact,
    cv_error_exact,
    default_alpha_range,
    fold_solution,
    masked_design,
    partition_folds,
    predictive_error_bound,
    psi0_weight,
    ridge_path,
    select_alpha,
    solve_ridge_normal,
    solve_ridge_svd,
)
from qridge_errors import DegeneracyError, InputError


def _random(N=8, M=4, seed=0):
    rng = np.random.default_rng(seed)
    return Dataset(rng.normal(size=(N, M)), rng.normal(size=N))


def test_identity_design():
    d = Dataset(np.eye(2), [1.0, 0.0])
    assert np.allclose(solve_ridge_normal(d, 1.0).w, [0.5, 0.0])
    # alpha = 0 reduces to ordinary least squares
    assert np.allclose(solve_ridge_normal(d, 0.0).w, [1.0, 0.0])


def test_dataset_validation():
    with pytest.raises(InputError):
        Dataset(np.ones((1, 2)), [1.0])
    with pytest.raises(InputError):
        Dataset(np.ones((3, 2)), [1.0, 2.0])
    with pytest.raises(InputError):
        Dataset(np.array([[1.0, np.inf], [0.0, 1.0]]), [1.0, 2.0])


def test_dataset_metadata_matches_direct_computation():
    d = Dataset(np.diag([4.0, 1.0, 0.5])[:, :2], [1.0, -3.0, 0.0])
    meta = d.metadata()
    assert meta["rank"] == 2
    assert abs(meta["kappa"] - 4.0) < 1e-12
    assert meta["x_max"] == 4.0 and meta["y_max"] == 3.0
    # κ convention covers the spectrum with (N+M)/κ at or below λ_min
    assert d.NM / d.kappa_convention <= d.svd.singular_values[-1] + 1e-12


def test_normal_and_svd_agree_on_random_instances():
    d = _random()
    for alpha in (0.3, 0.7):
        wn = solve_ridge_normal(d, alpha).w
        ws = solve_ridge_svd(d, alpha).w
        assert np.allclose(wn, ws, rtol=1e-10, atol=1e-12)


def test_normal_equations_singular_at_zero_alpha():
    X = np.outer([1.0, 2.0, 3.0], [1.0, 1.0])
    d = Dataset(X, [1.0, 0.0, 1.0])
    with pytest.raises(DegeneracyError):
        solve_ridge_normal(d, 0.0)
    # rank-deficient is fine once alpha > 0
    assert np.allclose(solve_ridge_normal(d, 0.5).w, solve_ridge_svd(d, 0.5).w)


def test_svd_scalar_and_orthogonal_output():
    assert np.allclose(solve_ridge_svd(Dataset([[2.0], [0.0]], [4.0, 0.0]), 0.0).w, [2.0])
    u = np.array([1.0, 0.0, 0.0])
    d = Dataset(3.0 * np.outer(u, [0.0, 1.0]), [0.0, 1.0, 2.0])
    assert np.allclose(solve_ridge_svd(d, 0.4).w, 0.0)


def test_svd_zero_output_flag():
    sol = solve_ridge_svd(Dataset(np.eye(2), [0.0, 0.0]), 1.0)
    assert sol.zero_output
    assert np.all(sol.w == 0.0)


def test_weight_norm_nonincreasing_in_alpha():
    d = _random(seed=5)
    norms = [np.linalg.norm(solve_ridge_svd(d, a).w) for a in np.linspace(0.01, 20, 30)]
    assert all(b <= a + 1e-12 for a, b in zip(norms, norms[1:]))


def test_residual_sum_matches_definition():
    d = _random(seed=2)
    sol = solve_ridge_svd(d, 0.9)
    r = d.X @ sol.w - d.y
    assert abs(sol.residual_sum - r @ r) <= 1e-10 * (r @ r)


def test_predictive_error_bound_cases():
    err, lower, lam = predictive_error_bound(_random(seed=4), 1.0)
    assert err >= lower - 1e-9
    assert 0.0 < lam < 1.0

    # y orthogonal to the column space: both sides equal ‖y‖²
    X = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    d = Dataset(X, [0.0, 0.0, 2.0])
    err, lower, _ = predictive_error_bound(d, 0.5)
    assert abs(err - 4.0) < 1e-12 and abs(lower - 4.0) < 1e-12

    # y in the span, alpha tiny: lower bound collapses
    d = Dataset(X, [1.0, 2.0, 0.0])
    _, lower, _ = predictive_error_bound(d, 1e-9)
    assert lower < 1e-6


def test_partition_folds_layouts():
    assert partition_folds(6, 3).folds == ((0, 1), (2, 3), (4, 5))
    assert partition_folds(4, 4).folds == ((0,), (1,), (2,), (3,))
    # remainder goes to the last fold
    assert partition_folds(7, 3).folds == ((0, 1), (2, 3), (4, 5, 6))
    with pytest.raises(InputError):
        partition_folds(4, 1)
    with pytest.raises(InputError):
        partition_folds(4, 5)


def test_masked_design_identities():
    d = _random()
    p = partition_folds(d.N, 4)
    first = masked_design(d, p, 0)
    assert np.all(first.X_minus_l[list(p.folds[0])] == 0.0)
    assert np.allclose(first.X_minus_l[2:], d.X[2:])

    yl_sum = sum(float(masked_design(d, p, l).y_l @ masked_design(d, p, l).y_l) for l in range(p.K))
    ym_sum = sum(float(masked_design(d, p, l).y_minus_l @ masked_design(d, p, l).y_minus_l) for l in range(p.K))
    assert abs(yl_sum - d.y_norm_sq) < 1e-10
    assert abs(ym_sum - (p.K - 1) * d.y_norm_sq) < 1e-10


def test_fold_solution_zero_when_remaining_y_is_zero():
    X = np.arange(1.0, 9.0).reshape(4, 2)
    d = Dataset(X, [1.0, 2.0, 0.0, 0.0])
    assert np.allclose(fold_solution(d, partition_folds(4, 2), 0, 0.5).w, 0.0)


def test_fold_solution_symmetric_halves():
    X = np.array([[1.0, 2.0], [0.5, -1.0]])
    d = Dataset(np.vstack([X, X]), [1.0, 2.0, 1.0, 2.0])
    p = partition_folds(4, 2)
    assert np.allclose(fold_solution(d, p, 0, 0.3).w, fold_solution(d, p, 1, 0.3).w)


def test_fold_solution_matches_svd_form():
    d = _random()
    p = partition_folds(d.N, 4)
    for l in range(p.K):
        split = masked_design(d, p, l)
        ref = solve_ridge_svd(Dataset(split.X_minus_l, split.y_minus_l), 0.5).w
        assert np.allclose(fold_solution(d, p, l, 0.5).w, ref, rtol=1e-10, atol=1e-12)


def test_cv_error_two_forms_and_limits():
    d = _random()
    p = partition_folds(d.N, 4)
    terms = cv_error_exact(d, p, 0.5)
    assert abs(terms.E1 + terms.E2 - 2 * terms.S3 - terms.E) <= 1e-10 * max(terms.E, terms.E1)
    assert abs(terms.E1 - d.y_norm_sq) < 1e-10
    # huge alpha: every fold predicts zero
    big = cv_error_exact(d, p, 1e14)
    assert abs(big.E - d.y_norm_sq) < 1e-8


def test_cv_error_zero_for_perfect_duplicated_fit():
    X = np.array([[1.0, 0.0], [0.0, 1.0]])
    w = np.array([2.0, -1.0])
    d = Dataset(np.vstack([X, X]), np.concatenate([X @ w, X @ w]))
    assert cv_error_exact(d, partition_folds(4, 2), 1e-12).E < 1e-12


def test_psi0_weight_for_divisible_folds():
    d = _random()
    p = partition_folds(8, 4)
    assert abs(psi0_weight(d, p) - 8 * 3 / 4) < 1e-12


def test_alpha_grid(caplog):
    assert alpha_grid(1, 5, 5) == [1.0, 2.0, 3.0, 4.0, 5.0]
    g = alpha_grid(0.1, 0.7, 7)
    assert g[0] == 0.1 and g[-1] == 0.7
    with caplog.at_level(logging.WARNING):
        assert alpha_grid(0.3, 2.0, 1) == [0.3]
    assert "L=1" in caplog.text
    with pytest.raises(InputError):
        alpha_grid(0.0, 1.0, 3)


def test_default_alpha_range():
    d = Dataset(np.diag([4.0, 2.0]), [1.0, 1.0])
    lo, hi = default_alpha_range(d)
    assert abs(lo - 16 / (10 * 4)) < 1e-12
    assert abs(hi - 8.0) < 1e-12


def test_argmin_tiebreak_prefers_later_entry():
    assert argmin_with_tiebreak([3.0, 1.0, 1.0, 2.0]) == 2
    assert argmin_with_tiebreak([5.0]) == 0
    assert argmin_with_tiebreak([4.0, 1.0, 2.0, 3.0]) == 1


def test_select_alpha_on_curve():
    d = _random(N=12, M=3, seed=9)
    p = partition_folds(d.N, 3)
    curve = cv_curve_exact(d, p, alpha_grid(0.1, 5.0, 5))
    alpha, idx = select_alpha(curve)
    assert idx == int(np.argmin(curve.E_values)) or np.isclose(
        curve.E_values[idx], min(curve.E_values), rtol=1e-12)
    assert alpha == curve.alphas[idx]
    for j, E in enumerate(curve.E_values):
        assert abs(curve.E1 + curve.E2[j] - 2 * curve.S3[j] - E) <= 1e-10 * max(E, curve.E1)


def test_balancedness():
    assert balancedness(np.full(5, 3.0)) == 1.0
    assert balancedness([0.0, 1.0, 0.0, 0.0]) == 0.25
    b = balancedness(np.random.default_rng(0).uniform(-1, 1, 64))
    assert 0.2 <= b <= 0.5
    with pytest.raises(InputError):
        balancedness(np.zeros(3))


def test_ridge_path_matches_scalar_solvers():
    d = _random(N=10, M=3, seed=9)
    alphas = [0.01, 0.3, 2.0, 40.0]
    path = ridge_path(d, alphas)
    assert path.shape == (4, 3)
    for row, alpha in zip(path, alphas):
        assert np.allclose(row, solve_ridge_svd(d, alpha).w, atol=1e-12)
        assert np.allclose(row, solve_ridge_normal(d, alpha).w, atol=1e-9)
