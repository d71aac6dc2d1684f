"""
Hermitian dilation, one-sparse embeddings and the parallel Hamiltonian simulation channel.

Register order for the channel is fixed as (control, ancilla, system). The
ancilla is a fresh copy of the uniform superposition |1><1|/N every step.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

import numkit
from qridge_errors import ContractError, InputError, ResourceError
from qstates import MixedState, OracleCounters, RegisterLayout

logger = logging.getLogger(__name__)

# Empirical error constant of the channel stays below 2 (see calibrate_safety);
# 4 keeps step_count-chosen runs at roughly half the target error.
DEFAULT_CHANNEL_SAFETY = 4.0


# ---------------------------------------------------------------------------
# 1. Hermitian dilation
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HermitianDilation:
    X: np.ndarray
    Xt: np.ndarray
    factors: numkit.SvdFactors
    kernel_basis: np.ndarray

    @property
    def kernel_dim(self) -> int:
        return int(self.kernel_basis.shape[1])

    @property
    def eigenvalues(self) -> np.ndarray:
        s = self.factors.singular_values
        return np.concatenate([s, -s, np.zeros(self.kernel_dim)])

    @property
    def eigenvectors(self) -> np.ndarray:
        u = self.factors.left_vectors
        v = self.factors.right_vectors
        plus = np.vstack([u, v]) / np.sqrt(2.0)
        minus = np.vstack([u, -v]) / np.sqrt(2.0)
        return np.hstack([plus, minus, self.kernel_basis])

    def spectrum(self, scale: float = 1.0) -> numkit.EigFactors:
        """Eigenpairs of scale·X̃, assembled from the SVD of X."""
        return numkit.EigFactors(eigenvalues=self.eigenvalues * scale, eigenvectors=self.eigenvectors)


def dilate(X) -> HermitianDilation:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise InputError(f"dilate expects a matrix, got shape {X.shape}")
    f = numkit.svd(X)
    N, M = X.shape
    Xt = np.zeros((N + M, N + M))
    Xt[:N, N:] = X
    Xt[N:, :N] = X.T

    # kernel of X̃: left null space of X on top, right null space below
    U_full, _, Vh_full = scipy.linalg.svd(X, full_matrices=True)
    r = f.rank
    top = np.vstack([U_full[:, r:], np.zeros((M, N - r))])
    bottom = np.vstack([np.zeros((N, M - r)), Vh_full[r:].T])
    kernel = np.hstack([top, bottom])
    return HermitianDilation(X=X, Xt=Xt, factors=f, kernel_basis=kernel)


# ---------------------------------------------------------------------------
# 2. One-sparse embedding
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OneSparseEmbedding:
    Q: int
    N: int
    S: np.ndarray
    M_A: float

    def is_one_sparse(self) -> bool:
        nz = self.S != 0
        return bool(nz.sum(axis=0).max(initial=0) <= 1 and nz.sum(axis=1).max(initial=0) <= 1)


def _check_family(A_list: Sequence) -> List[np.ndarray]:
    mats = [np.asarray(A, dtype=complex) for A in A_list]
    if not mats:
        raise InputError("need at least one Hamiltonian")
    N = mats[0].shape[0]
    for q, A in enumerate(mats):
        if A.ndim != 2 or A.shape != (N, N):
            raise InputError(f"A_{q} has shape {A.shape}, expected ({N}, {N})")
        if not numkit.is_hermitian(A):
            raise ContractError(f"A_{q} is not Hermitian")
    return mats


def embed_one_sparse(A_list: Sequence) -> OneSparseEmbedding:
    mats = _check_family(A_list)
    N = mats[0].shape[0]
    blocks = []
    for A in mats:
        S_q = np.zeros((N * N, N * N), dtype=complex)
        j, k = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
        # A_jk |k><j| ⊗ |j><k|
        S_q[k * N + j, j * N + k] = A[j, k]
        blocks.append(S_q)
    S = scipy.linalg.block_diag(*blocks)
    return OneSparseEmbedding(Q=len(mats), N=N, S=S, M_A=numkit.max_abs(np.stack(mats)))


def exact_conditional_unitary(A_list: Sequence, t: float, N: Optional[int] = None) -> np.ndarray:
    """Σ_q |q><q| ⊗ exp(-i A_q t / N)."""
    mats = _check_family(A_list)
    N = N or mats[0].shape[0]
    return scipy.linalg.block_diag(*[numkit.expm_hermitian(A / N, t) for A in mats])


# ---------------------------------------------------------------------------
# 3. Parallel simulation channel
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChannelConfig:
    t: float
    n: int
    epsilon_target: Optional[float] = None

    def __post_init__(self):
        if int(self.n) < 1:
            raise InputError(f"channel step count must be >= 1, got {self.n}")
        if not np.isfinite(self.t):
            raise InputError("channel time must be finite")
        object.__setattr__(self, "n", int(self.n))

    @property
    def delta_t(self) -> float:
        return self.t / self.n

    @classmethod
    def for_target(cls, M_A: float, t: float, epsilon: float,
                   safety: float = DEFAULT_CHANNEL_SAFETY) -> "ChannelConfig":
        return cls(t=t, n=step_count(M_A, t, epsilon, safety), epsilon_target=epsilon)


def _as_density(state, name: str) -> np.ndarray:
    if isinstance(state, MixedState):
        return np.asarray(state.rho)
    rho = np.asarray(state, dtype=complex)
    if not numkit.is_density_operator(rho):
        raise ContractError(f"{name} is not a valid density operator")
    return rho


def parallel_sim_channel(
    A_list: Sequence,
    sigma_c,
    sigma,
    cfg: ChannelConfig,
    budget: int = numkit.DIMENSION_BUDGET,
    counters: Optional[OracleCounters] = None,
) -> MixedState:
    """
    Approximate Σ_q |q><q| ⊗ exp(-i A_q t/N) on σ_c ⊗ σ with n ancilla interactions.

    Returns:
        the joint (control, system) state after n steps
    """
    emb = embed_one_sparse(A_list)
    Q, N = emb.Q, emb.N
    if Q * N * N > budget:
        raise ResourceError(
            f"channel operator dimension {Q * N * N} exceeds budget {budget}"
        )
    rho_c = _as_density(sigma_c, "control state")
    rho_s = _as_density(sigma, "system state")
    if rho_c.shape != (Q, Q) or rho_s.shape != (N, N):
        raise InputError(
            f"state shapes {rho_c.shape}, {rho_s.shape} do not match Q={Q}, N={N}"
        )

    ancilla = np.full((N, N), 1.0 / N, dtype=complex)
    W = numkit.expm_hermitian(emb.S, cfg.delta_t)
    Wd = W.conj().T
    joint = numkit.kron(rho_c, rho_s, budget)
    for _ in range(cfg.n):
        # (control, system, ancilla) -> (control, ancilla, system)
        full = numkit.kron(joint, ancilla, budget)
        full = full.reshape(Q, N, N, Q, N, N).transpose(0, 2, 1, 3, 5, 4).reshape(Q * N * N, Q * N * N)
        full = W @ full @ Wd
        joint = numkit.partial_trace(full, [Q, N, N], keep=[0, 2])
    if counters is not None:
        counters.add("hamsim_steps", cfg.n)
    layout = RegisterLayout.of(("control", Q), ("system", N))
    return MixedState(joint, layout)


def exact_conditional_output(A_list: Sequence, sigma_c, sigma, t: float) -> np.ndarray:
    rho = np.kron(_as_density(sigma_c, "control state"), _as_density(sigma, "system state"))
    U = exact_conditional_unitary(A_list, t)
    return U @ rho @ U.conj().T


def default_test_states(Q: int, N: int, seed: int = 0) -> List[Tuple[np.ndarray, np.ndarray]]:
    """
    Uniform control superposition paired with each computational basis state,
    the uniform system state and two seeded random pure states.
    """
    rng = np.random.default_rng(seed)
    plus = np.full(Q, 1.0 / np.sqrt(Q), dtype=complex)
    sigma_c = np.outer(plus, plus.conj())
    systems = [np.eye(N, dtype=complex)[j] for j in range(N)]
    systems.append(np.full(N, 1.0 / np.sqrt(N), dtype=complex))
    for _ in range(2):
        v = rng.normal(size=N) + 1j * rng.normal(size=N)
        systems.append(v / np.linalg.norm(v))
    return [(sigma_c, np.outer(v, v.conj())) for v in systems]


def channel_error(
    A_list: Sequence,
    cfg: ChannelConfig,
    test_states: Sequence[Tuple[object, object]],
    budget: int = numkit.DIMENSION_BUDGET,
) -> Tuple[float, List[float]]:
    if not test_states:
        raise InputError("channel_error needs at least one test state")
    per_state = []
    for sigma_c, sigma in test_states:
        out = parallel_sim_channel(A_list, sigma_c, sigma, cfg, budget=budget)
        ref = exact_conditional_output(A_list, sigma_c, sigma, cfg.t)
        per_state.append(numkit.trace_distance(out.rho, ref))
    return max(per_state), per_state


def step_count(M_A: float, t: float, epsilon: float, safety: float = DEFAULT_CHANNEL_SAFETY) -> int:
    if min(M_A, t, epsilon, safety) <= 0:
        raise InputError("step_count arguments must all be positive")
    raw = safety * M_A * M_A * t * t / epsilon
    # absorb float noise so exact ratios such as 2.0000000000000004 do not round up
    return max(1, math.ceil(raw - 1e-9 * raw))


def calibrate_safety(
    family: Sequence[Sequence],
    t: float = 1.0,
    n: int = 16,
    seed: int = 0,
) -> float:
    """
    Largest observed error·n/(M_A² t²) over a family of Hamiltonian lists.

    A safety factor at or above this value makes step_count meet its target on the family.
    """
    worst = 0.0
    cfg = ChannelConfig(t=t, n=n)
    for A_list in family:
        emb = embed_one_sparse(A_list)
        if emb.M_A == 0.0:
            continue
        err, _ = channel_error(A_list, cfg, default_test_states(emb.Q, emb.N, seed))
        worst = max(worst, err * n / (emb.M_A ** 2 * t * t))
    logger.debug("calibrated channel constant %.4f over %d instances", worst, len(family))
    return worst


def random_hermitian_family(count: int, seed: int = 0,
                            Q_range: Tuple[int, int] = (1, 3),
                            N_range: Tuple[int, int] = (2, 4)) -> List[List[np.ndarray]]:
    """Random Hermitian lists with entries of modulus at most 1."""
    rng = np.random.default_rng(seed)
    family = []
    for _ in range(count):
        Q = int(rng.integers(Q_range[0], Q_range[1] + 1))
        N = int(rng.integers(N_range[0], N_range[1] + 1))
        mats = []
        for _ in range(Q):
            G = rng.uniform(-1, 1, (N, N)) + 1j * rng.uniform(-1, 1, (N, N))
            mats.append((G + G.conj().T) / 4.0)
        family.append(mats)
    return family


def naive_cost_model(Q: int, M_A: float, t: float, epsilon: float, N: int = 2) -> Tuple[float, float, float]:
    """
    Abstract oracle-call costs with polylog fixed to log2² of the embedded
    dimension: one N² block per naive run against Q·N² for the parallel
    family, so Q = 1 prices both alike.

    Returns:
        (parallel_cost, naive_cost, naive/parallel)
    """
    if min(Q, M_A, t, epsilon) <= 0 or N < 2:
        raise InputError("naive_cost_model needs positive arguments and N >= 2")
    base = M_A * M_A * t * t / epsilon
    parallel = base * math.log2(N * N * Q) ** 2
    naive = Q * Q * base * math.log2(N * N) ** 2
    return parallel, naive, naive / parallel
