"""
Dense complex linear algebra kernel.

Everything here is a pure function over numpy arrays: SVD with a numerical rank
rule, Hermitian eigendecomposition, exact matrix exponentials, tensor products
under a dimension budget, partial traces and norms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from qridge_errors import ContractError, InputError, ResourceError

RANK_RTOL = 1e-10
HERMITIAN_RTOL = 1e-12
TRACE_ATOL = 1e-10
DIMENSION_BUDGET = 4096


# ---------------------------------------------------------------------------
# 1. Factorizations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SvdFactors:
    """Reduced SVD truncated to the numerical rank."""

    singular_values: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray
    rank: int

    def reconstruct(self) -> np.ndarray:
        return (self.left_vectors * self.singular_values) @ self.right_vectors.conj().T


@dataclass(frozen=True)
class EigFactors:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def _as_matrix(a) -> np.ndarray:
    arr = np.asarray(a)
    if arr.ndim != 2:
        raise InputError(f"expected a 2-D matrix, got shape {arr.shape}")
    return arr


def max_abs(a) -> float:
    arr = np.asarray(a)
    return float(np.max(np.abs(arr))) if arr.size else 0.0


def is_hermitian(a, rtol: float = HERMITIAN_RTOL) -> bool:
    arr = _as_matrix(a)
    if arr.shape[0] != arr.shape[1]:
        return False
    return max_abs(arr - arr.conj().T) <= rtol * max(1.0, max_abs(arr))


def svd(x) -> SvdFactors:
    x = _as_matrix(x)
    if not np.all(np.isfinite(x)):
        raise InputError("svd: matrix has non-finite entries")
    u, s, vh = scipy.linalg.svd(x, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        rank = 0
    else:
        rank = int(np.count_nonzero(s > RANK_RTOL * s[0]))
    return SvdFactors(
        singular_values=s[:rank].copy(),
        left_vectors=u[:, :rank].copy(),
        right_vectors=vh[:rank].conj().T.copy(),
        rank=rank,
    )


def eigh(a) -> EigFactors:
    a = _as_matrix(a)
    if not is_hermitian(a):
        raise ContractError("eigh: matrix is not Hermitian within tolerance")
    mu, v = scipy.linalg.eigh(a)
    return EigFactors(eigenvalues=mu, eigenvectors=v)


def expm_hermitian(a, t: float) -> np.ndarray:
    """exp(-i A t) through the eigendecomposition of A."""
    f = eigh(a)
    phases = np.exp(-1j * f.eigenvalues * t)
    return (f.eigenvectors * phases) @ f.eigenvectors.conj().T


# ---------------------------------------------------------------------------
# 2. Tensor structure
# ---------------------------------------------------------------------------


def kron(a, b, budget: int = DIMENSION_BUDGET) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim == 2 and b.ndim == 2:
        rows = a.shape[0] * b.shape[0]
        cols = a.shape[1] * b.shape[1]
        if max(rows, cols) > budget:
            raise ResourceError(
                f"kron: result {rows}x{cols} exceeds dimension budget {budget}"
            )
    return np.kron(a, b)


def partial_trace(rho, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """
    Trace out every subsystem not listed in `keep` (0-based, in register order).

    The kept subsystems stay in their original order.
    """
    rho = _as_matrix(rho)
    dims = [int(d) for d in dims]
    total = int(np.prod(dims)) if dims else 0
    if rho.shape != (total, total):
        raise InputError(f"partial_trace: dims {dims} do not match operator shape {rho.shape}")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise InputError(f"partial_trace: keep indices {keep} out of range for {len(dims)} systems")
    trace_in = np.trace(rho)
    if abs(trace_in - 1.0) > TRACE_ATOL:
        raise ContractError(f"partial_trace: input trace {trace_in.real:.3e} is not 1")

    n = len(dims)
    tensor = rho.reshape(dims + dims)
    drop = [ax for ax in range(n) if ax not in keep]
    cur = n
    for ax in sorted(drop, reverse=True):
        tensor = np.trace(tensor, axis1=ax, axis2=ax + cur)
        cur -= 1
    kept_dim = int(np.prod([dims[k] for k in keep])) if keep else 1
    return tensor.reshape(kept_dim, kept_dim)


# ---------------------------------------------------------------------------
# 3. Norms and distances
# ---------------------------------------------------------------------------


def spectral_norm(a) -> float:
    a = _as_matrix(a)
    if a.size == 0:
        return 0.0
    return float(scipy.linalg.svdvals(a)[0])


def condition_number(x) -> float:
    f = svd(x)
    if f.rank == 0:
        raise InputError("condition_number: zero matrix")
    return float(f.singular_values[0] / f.singular_values[-1])


def trace_distance(rho, sigma) -> float:
    diff = _as_matrix(rho) - _as_matrix(sigma)
    diff = 0.5 * (diff + diff.conj().T)
    return 0.5 * float(np.sum(np.abs(scipy.linalg.eigvalsh(diff))))


def is_density_operator(rho, atol: float = TRACE_ATOL) -> bool:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return False
    if not is_hermitian(rho, rtol=max(HERMITIAN_RTOL, atol)):
        return False
    if abs(np.trace(rho) - 1.0) > atol:
        return False
    return bool(scipy.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0] >= -atol)
