import numpy as np
import pytest

import numkit
from hamsim import (
    dilate,
    embed_one_sparse,
    exact_conditional_unitary,
    naive_cost_model,
    random_hermitian_family,
    step_count,
)
from qridge_errors import ContractError, InputError

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]])


def test_dilate_scalar():
    dil = dilate([[2.0]])
    assert np.allclose(dil.Xt, [[0.0, 2.0], [2.0, 0.0]])
    assert sorted(dil.eigenvalues.tolist()) == [-2.0, 2.0]
    assert dil.kernel_dim == 0


def test_dilate_zero_matrix_is_all_kernel():
    dil = dilate(np.zeros((3, 2)))
    assert dil.kernel_dim == 5
    assert np.allclose(dil.Xt, 0.0)


def test_dilate_spectrum_matches_eigh_and_reconstructs():
    X = np.random.default_rng(1).normal(size=(4, 3))
    dil = dilate(X)
    assert dil.kernel_dim == 7 - 2 * 3
    expected = np.sort(numkit.eigh(dil.Xt).eigenvalues)
    assert np.allclose(np.sort(dil.eigenvalues), expected, atol=1e-10)
    spec = dil.spectrum(0.5)
    assert np.allclose(spec.reconstruct(), 0.5 * dil.Xt, atol=1e-10)
    # eigenvectors form an orthonormal basis of the dilated space
    V = dil.eigenvectors
    assert np.allclose(V.T @ V, np.eye(7), atol=1e-10)


def test_embed_one_sparse_pauli_x():
    emb = embed_one_sparse([PAULI_X])
    # A_01 moves |0>|1> to |1>|0>, i.e. column 1 to row 2
    assert emb.S[2, 1] == 1.0
    assert emb.S[1, 2] == 1.0
    assert np.count_nonzero(emb.S) == 2
    assert emb.M_A == 1.0


def test_embed_one_sparse_diagonal_blocks():
    emb = embed_one_sparse([np.diag([1.0, 2.0]), np.diag([3.0, 4.0])])
    nz = np.argwhere(emb.S != 0)
    # diagonal A_q only touch |j>|j> for each control block
    assert {(int(r), int(c)) for r, c in nz} == {(0, 0), (3, 3), (4, 4), (7, 7)}


def test_embed_one_sparse_random_is_hermitian_and_one_sparse():
    A_list = random_hermitian_family(1, seed=3, Q_range=(2, 2), N_range=(3, 3))[0]
    emb = embed_one_sparse(A_list)
    assert emb.S.shape == (18, 18)
    assert numkit.is_hermitian(emb.S)
    assert emb.is_one_sparse()


def test_embed_rejects_bad_families():
    with pytest.raises(InputError):
        embed_one_sparse([np.eye(2), np.eye(3)])
    with pytest.raises(ContractError):
        embed_one_sparse([np.array([[0.0, 1.0], [0.0, 0.0]])])


def test_exact_conditional_unitary_reductions():
    assert np.allclose(exact_conditional_unitary([np.zeros((2, 2))] * 2, 1.3), np.eye(4))
    A = np.array([[1.0, 0.5], [0.5, -1.0]])
    assert np.allclose(exact_conditional_unitary([A], 0.8), numkit.expm_hermitian(A / 2, 0.8))
    U = exact_conditional_unitary(random_hermitian_family(1, seed=2, Q_range=(2, 2), N_range=(2, 2))[0], 1.0)
    assert np.allclose(U.conj().T @ U, np.eye(4), atol=1e-10)


def test_step_count_formula():
    assert step_count(1.0, 1.0, 0.5, safety=1.0) == 2
    assert step_count(1.0, 1.0, 0.25, safety=1.0) == 4
    assert step_count(1e-6, 1.0, 0.5, safety=1.0) == 1
    with pytest.raises(InputError):
        step_count(1.0, 1.0, 0.0)


def test_naive_cost_model_ratio():
    parallel, naive, r1 = naive_cost_model(1, 1.0, 1.0, 0.1)
    assert parallel == pytest.approx(naive)
    assert r1 == pytest.approx(1.0)
    assert naive_cost_model(1, 2.0, 0.5, 0.01, N=8)[2] == pytest.approx(1.0)
    ratios = [naive_cost_model(q, 1.0, 1.0, 0.1)[2] for q in range(1, 12)]
    assert all(b > a for a, b in zip(ratios, ratios[1:]))
    _, _, r10 = naive_cost_model(10, 1.0, 1.0, 0.1)
    assert 10 < r10 < 100
