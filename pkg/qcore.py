"""
Quantum register machinery on exact state vectors.

Amplitude amplification and estimation are modeled by exact branch
probabilities plus closed-form repetition counts; measurement outcomes are
never sampled. Phase estimation writes the exact QFT kernel (leakage included)
or, in "exact" readout, the true eigenvalue of every eigen-component.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

import numkit
from classical_ridge import Dataset, FoldPartition
from qridge_errors import (
    AliasingError,
    ContractError,
    DegeneracyError,
    ImpossibleOutcomeError,
    InputError,
)
from qstates import EXACT, NoiseModel, OracleCounters, PureState, RegisterLayout

logger = logging.getLogger(__name__)

IMPOSSIBLE_FLOOR = 1e-14
WINDOW_SLACK = 1e-12
GRID_SNAP = 1e-12
ROTATION_SLACK = 1e-12

Generator = Union[np.ndarray, numkit.EigFactors]


@dataclass
class PostselectRecord:
    probability: float
    post_state: PureState
    outcome_label: str
    oracle_calls: Dict[str, int] = field(default_factory=dict)


@dataclass
class PhaseEstimateRecord:
    s: int
    t0: float
    readout: str
    register: str
    target: str
    control: Optional[str]
    values: List[np.ndarray]
    weights: np.ndarray
    spectra: List[numkit.EigFactors] = field(repr=False, default_factory=list)
    kernels: List[np.ndarray] = field(repr=False, default_factory=list)

    @property
    def peaks(self) -> List[Tuple[float, float]]:
        """(decoded value, weight) for every populated (control row, slot)."""
        out = []
        for row, vals in enumerate(self.values):
            for slot, v in enumerate(vals):
                w = float(self.weights[row, slot])
                if w > 0.0:
                    out.append((float(v), w))
        return out

    def decoded_table(self) -> np.ndarray:
        return np.vstack(self.values)


def _snapshot(counters: Optional[OracleCounters]) -> Dict[str, int]:
    return counters.snapshot() if counters is not None else {}


# ---------------------------------------------------------------------------
# 1. State preparation
# ---------------------------------------------------------------------------


def prepare_amplitude_state(
    v,
    exact: bool = True,
    counters: Optional[OracleCounters] = None,
    pad_to: Optional[int] = None,
    name: str = "system",
) -> PostselectRecord:
    """
    Amplitude-encode v, optionally padded with trailing zeros to `pad_to` entries.

    In circuit mode the probability is the rotation-postselection rate
    P = Σ v_j² / (N ‖v‖_max²); in exact mode it is 1.
    """
    v = np.asarray(v, dtype=float).reshape(-1)
    peak = numkit.max_abs(v)
    if peak == 0.0:
        raise InputError("cannot amplitude-encode the zero vector")
    dim = pad_to or v.size
    if dim < v.size:
        raise InputError(f"pad_to={dim} smaller than vector length {v.size}")
    padded = np.zeros(dim)
    padded[: v.size] = v
    if counters is not None:
        counters.add("O_y", 2)
    prob = 1.0 if exact else float(v @ v) / (v.size * peak * peak)
    state = PureState.from_vector(padded, RegisterLayout.of((name, dim)))
    return PostselectRecord(prob, state, "amplitude-rotation=1", _snapshot(counters))


def estimate_norm_sq(v, rel_err: float, noise: NoiseModel = EXACT) -> float:
    """‖v‖² recovered as N·P_v·‖v‖_max² with optional injected relative error."""
    v = np.asarray(v, dtype=float).reshape(-1)
    peak = numkit.max_abs(v)
    if peak == 0.0:
        return 0.0
    p_v = float(v @ v) / (v.size * peak * peak)
    return v.size * p_v * peak * peak * noise.relative_factor(rel_err)


def prepare_psi0(d: Dataset, p: FoldPartition, counters: Optional[OracleCounters] = None) -> PostselectRecord:
    """
    Σ_l Σ_{τ∈S_l} |τ> ⊗ |0, y_{-l}> (normalized) over registers (index, system).

    The probability is that of kicking out the in-fold entries from a uniform
    index register times |0, y>.
    """
    if p.N != d.N:
        raise InputError(f"partition built for N={p.N}, dataset has N={d.N}")
    if d.y_norm_sq == 0.0:
        raise InputError("y is the zero vector")
    psi = np.zeros((d.N, d.NM))
    for rows in p.folds:
        y_minus = np.array(d.y, copy=True)
        y_minus[list(rows)] = 0.0
        psi[list(rows), : d.N] = y_minus
    if counters is not None:
        counters.add("O_y", 2)
    weight = float(np.sum(psi * psi))
    if weight == 0.0:
        raise DegeneracyError("every fold complement of y is zero")
    prob = weight / (d.N * d.y_norm_sq)
    layout = RegisterLayout.of(("index", d.N), ("system", d.NM))
    return PostselectRecord(prob, PureState.from_vector(psi.reshape(-1), layout), "kick-out=0", _snapshot(counters))


# ---------------------------------------------------------------------------
# 2. Phase estimation
# ---------------------------------------------------------------------------


def signed_window_scale(max_abs_eigenvalue: float, s: int) -> float:
    """t0 with max|μ|·t0/(2π) = 1/2 - 2^-s."""
    if s < 1:
        raise InputError(f"phase bits must be >= 1, got {s}")
    if max_abs_eigenvalue <= 0.0:
        return 1.0
    return 2.0 * np.pi * (0.5 - 2.0 ** -s) / max_abs_eigenvalue


def decode_slots(s: int, t0: float) -> np.ndarray:
    """Signed eigenvalue for every phase-register slot; m/2^s > 1/2 wraps negative."""
    P = 2 ** s
    frac = np.arange(P) / P
    frac = np.where(frac > 0.5, frac - 1.0, frac)
    return 2.0 * np.pi * frac / t0


def qft_kernel(phases: np.ndarray, s: int) -> np.ndarray:
    """
    Amplitude of slot m given phase φ: e^{iπδ(2^s-1)} sin(π2^sδ) / (2^s sin πδ), δ = φ - m/2^s.

    Returns:
        array of shape (len(phases), 2^s)
    """
    P = 2 ** s
    phi = np.mod(np.asarray(phases, dtype=float), 1.0)
    delta = phi[:, None] - np.arange(P)[None, :] / P
    x = P * delta
    snapped = np.abs(x - np.round(x)) <= GRID_SNAP * max(1.0, P)
    out = np.zeros(delta.shape, dtype=complex)
    # a snapped δ is either 0 (delta peak) or a nonzero multiple of 2^-s (zero amplitude)
    out[snapped & (np.mod(np.round(x), P) == 0)] = 1.0
    free = ~snapped
    d = delta[free]
    out[free] = np.exp(1j * np.pi * d * (P - 1)) * np.sin(np.pi * P * d) / (P * np.sin(np.pi * d))
    return out


def _as_eig(gen: Generator) -> numkit.EigFactors:
    if isinstance(gen, numkit.EigFactors):
        return gen
    return numkit.eigh(np.asarray(gen))


def _split_axes(layout: RegisterLayout, target: str, control: Optional[str]):
    t_ax = layout.index(target)
    c_ax = layout.index(control) if control is not None else None
    rest = [a for a in range(len(layout.dims)) if a not in (t_ax, c_ax)]
    perm = ([c_ax] if c_ax is not None else []) + rest + [t_ax]
    return perm, c_ax, rest, t_ax


def _to_rows(state: PureState, perm, c_ax, rest, t_ax) -> np.ndarray:
    dims = state.layout.dims
    C = dims[c_ax] if c_ax is not None else 1
    R = int(np.prod([dims[a] for a in rest])) if rest else 1
    return state.tensor_view().transpose(perm).reshape(C, R, dims[t_ax])


def _from_rows(out: np.ndarray, layout: RegisterLayout, perm, extra: int) -> np.ndarray:
    dims = layout.dims
    shaped = out.reshape([dims[a] for a in perm] + [extra])
    inverse = list(np.argsort(perm)) + [len(perm)]
    return shaped.transpose(inverse)


def phase_estimation(
    generator: Union[Generator, Sequence[Generator]],
    scale: float,
    state: PureState,
    s: int,
    *,
    target: str = "system",
    control: Optional[str] = None,
    readout: str = "qft",
    counters: Optional[OracleCounters] = None,
    register: str = "phase",
) -> Tuple[PureState, PhaseEstimateRecord]:
    """
    Phase estimation of exp(-i H t0) on register `target`, t0 = scale.

    With `control` set, `generator` is a sequence with one Hamiltonian per basis
    state of the control register (conditional evolution). The eigenvalue
    register is appended last. `readout="qft"` writes the 2^s-slot QFT kernel;
    `readout="exact"` writes each eigen-component's exact eigenvalue.
    """
    if s < 1:
        raise InputError(f"phase bits must be >= 1, got {s}")
    if readout not in ("qft", "exact"):
        raise InputError(f"unknown readout {readout!r}")
    perm, c_ax, rest, t_ax = _split_axes(state.layout, target, control)
    rows = _to_rows(state, perm, c_ax, rest, t_ax)
    C, _, D = rows.shape

    if control is None:
        spectra = [_as_eig(generator)] * C
    else:
        gens = list(generator)
        if len(gens) != C:
            raise InputError(f"need {C} conditional generators, got {len(gens)}")
        cache: Dict[int, numkit.EigFactors] = {}
        spectra = []
        for g in gens:
            if id(g) not in cache:
                cache[id(g)] = _as_eig(g)
            spectra.append(cache[id(g)])

    t0 = float(scale)
    limit = 0.5 - 2.0 ** -s + WINDOW_SLACK
    P = 2 ** s if readout == "qft" else D
    out = np.empty(rows.shape + (P,), dtype=complex)
    kernels: List[np.ndarray] = []
    values: List[np.ndarray] = []
    slots = decode_slots(s, t0) if readout == "qft" else None
    for c in range(C):
        f = spectra[c]
        V = f.eigenvectors
        if V.shape != (D, D):
            raise InputError(f"generator for row {c} has eigenvector shape {V.shape}, expected ({D}, {D})")
        phases = f.eigenvalues * t0 / (2.0 * np.pi)
        if readout == "qft":
            if phases.size and np.max(np.abs(phases)) > limit:
                raise AliasingError(
                    f"eigenphase {np.max(np.abs(phases)):.6f} outside signed window {limit:.6f}; reduce t0"
                )
            A = qft_kernel(phases, s)
            values.append(slots)
        else:
            A = np.eye(D, dtype=complex)
            values.append(np.asarray(f.eigenvalues, dtype=float).copy())
        kernels.append(A)
        coef = rows[c] @ V.conj()
        out[c] = np.einsum("dk,rk,km->rdm", V, coef, A)

    if counters is not None:
        counters.add("hamsim_steps", 2 ** s - 1)
        counters.add("O_X", 2 ** s - 1)

    weights = np.sum(np.abs(out) ** 2, axis=(1, 2))
    new_amps = _from_rows(out, state.layout, perm, P)
    new_state = PureState(new_amps.reshape(-1), state.layout.append(register, P))
    record = PhaseEstimateRecord(
        s=s, t0=t0, readout=readout, register=register, target=target, control=control,
        values=values, weights=weights, spectra=spectra, kernels=kernels,
    )
    return new_state, record


def inverse_phase_estimation(
    state: PureState,
    record: PhaseEstimateRecord,
    counters: Optional[OracleCounters] = None,
) -> PostselectRecord:
    """
    Apply the inverse of the phase-estimation unitary, then project the
    eigenvalue register onto |0> and drop it.
    """
    layout = state.layout
    reg_ax = layout.index(record.register)
    # eigenvalue register goes to the back of the row view, after the target
    inner_layout = layout.without(record.register)
    tensor = np.moveaxis(state.tensor_view(), reg_ax, -1)
    P = layout.dims[reg_ax]
    perm, c_ax, rest, t_ax = _split_axes(inner_layout, record.target, record.control)
    dims = inner_layout.dims
    C = dims[c_ax] if c_ax is not None else 1
    R = int(np.prod([dims[a] for a in rest])) if rest else 1
    D = dims[t_ax]
    rows = tensor.transpose(perm + [len(perm)]).reshape(C, R, D, P)
    if C != len(record.spectra):
        raise InputError("state does not match the phase-estimation record")

    back = np.empty((C, R, D), dtype=complex)
    for c in range(C):
        V = record.spectra[c].eigenvectors
        A = record.kernels[c]
        coef = np.einsum("dk,rdm->rkm", V.conj(), rows[c])
        back[c] = np.einsum("dk,km,rkm->rd", V, A.conj(), coef)

    if counters is not None:
        counters.add("hamsim_steps", 2 ** record.s - 1)
        counters.add("O_X", 2 ** record.s - 1)

    amps = _from_rows(back[..., None], inner_layout, perm, 1).reshape(-1)
    prob = float(np.vdot(amps, amps).real)
    if prob < IMPOSSIBLE_FLOOR:
        raise ImpossibleOutcomeError("eigenvalue register never returns to |0>")
    post = PureState(amps / np.sqrt(prob), inner_layout)
    return PostselectRecord(prob, post, f"{record.register}=0", _snapshot(counters))


# ---------------------------------------------------------------------------
# 3. Controlled operations and measurement
# ---------------------------------------------------------------------------


def append_flag(state: PureState, registers: Sequence[str], amplitudes: np.ndarray, name: str = "flag") -> PureState:
    """
    Append a qubit rotated to sqrt(1-a²)|0> + a|1>, with a read from `amplitudes`
    indexed by the basis states of `registers`.
    """
    table = np.asarray(amplitudes, dtype=float)
    axes = [state.layout.index(r) for r in registers]
    if table.shape != tuple(state.layout.dims[a] for a in axes):
        raise InputError(f"amplitude table shape {table.shape} does not match registers {list(registers)}")
    if np.any(np.abs(table) > 1.0 + ROTATION_SLACK):
        raise ContractError("rotation amplitude exceeds 1")
    table = np.clip(table, -1.0, 1.0)
    order = np.argsort(axes)
    table = table.transpose(order)
    shape = [1] * len(state.layout.dims)
    for a in axes:
        shape[a] = state.layout.dims[a]
    a1 = table.reshape(shape)
    a0 = np.sqrt(1.0 - a1 * a1)
    T = state.tensor_view()
    out = np.stack([T * a0, T * a1], axis=-1)
    return PureState(out.reshape(-1), state.layout.append(name, 2))


def h_value(lam, n_plus_m: float, alpha: float) -> np.ndarray:
    """h(λ, α) = (N+M)λ / (λ² + α); zero where λ is exactly zero."""
    lam = np.asarray(lam, dtype=float)
    out = np.zeros_like(lam)
    nz = lam != 0.0
    out[nz] = n_plus_m * lam[nz] / (lam[nz] ** 2 + alpha)
    return out


def rotation_table(record: PhaseEstimateRecord, alpha: float, n_plus_m: float) -> np.ndarray:
    """h evaluated on the decoded λ̂ = (N+M)·μ̂ of every (control row, slot)."""
    return np.vstack([h_value(n_plus_m * v, n_plus_m, alpha) for v in record.values])


def support_max_h(record: PhaseEstimateRecord, alpha: float, n_plus_m: float, state: Optional[PureState] = None) -> float:
    table = rotation_table(record, alpha, n_plus_m)
    weights = record.weights if state is None else _slot_weights(state, record)
    populated = weights > 0.0
    return float(np.max(np.abs(table[populated]))) if np.any(populated) else 0.0


def _slot_weights(state: PureState, record: PhaseEstimateRecord) -> np.ndarray:
    p = np.abs(state.tensor_view()) ** 2
    reg_ax = state.layout.index(record.register)
    keep = [reg_ax]
    if record.control is not None:
        keep.insert(0, state.layout.index(record.control))
    other = tuple(a for a in range(p.ndim) if a not in keep)
    w = p.sum(axis=other)
    if record.control is None:
        return w.reshape(1, -1)
    if keep[0] > keep[1]:
        w = w.T
    return w


def controlled_rotation_h(
    state: PureState,
    record: PhaseEstimateRecord,
    alpha: float,
    C: float,
    n_plus_m: float,
    name: str = "flag",
) -> PureState:
    """Flag qubit with |1> amplitude C·h(λ̂, α) read from the eigenvalue register."""
    if C <= 0.0 or alpha <= 0.0:
        raise InputError(f"need C > 0 and alpha > 0, got C={C}, alpha={alpha}")
    table = C * rotation_table(record, alpha, n_plus_m)
    populated = _slot_weights(state, record) > 0.0
    worst = float(np.max(np.abs(table[populated]))) if np.any(populated) else 0.0
    if worst > 1.0 + ROTATION_SLACK:
        raise ContractError(f"C·h reaches {worst:.6f} > 1 on the populated support; choose a smaller C")
    # unpopulated slots carry no amplitude; keep their rotation well defined
    table = np.where(populated, table, np.clip(table, -1.0, 1.0))
    if record.control is None:
        return append_flag(state, [record.register], table[0], name)
    return append_flag(state, [record.control, record.register], table, name)


def postselect(
    state: PureState,
    register: str,
    outcome: int,
    counters: Optional[OracleCounters] = None,
) -> PostselectRecord:
    ax = state.layout.index(register)
    dim = state.layout.dims[ax]
    if not 0 <= outcome < dim:
        raise InputError(f"outcome {outcome} outside register {register!r} of size {dim}")
    branch = np.take(state.tensor_view(), outcome, axis=ax).reshape(-1)
    prob = float(np.vdot(branch, branch).real)
    if prob < IMPOSSIBLE_FLOOR:
        raise ImpossibleOutcomeError(f"outcome {register}={outcome} has probability {prob:.3e}")
    post = PureState(branch / np.sqrt(prob), state.layout.without(register))
    return PostselectRecord(prob, post, f"{register}={outcome}", _snapshot(counters))


def zero_eigen_filter(
    state: PureState,
    record: PhaseEstimateRecord,
    tolerance: Optional[float] = None,
    counters: Optional[OracleCounters] = None,
) -> PostselectRecord:
    """Project out every (row, slot) whose decoded eigenvalue is zero."""
    table = record.decoded_table()
    if tolerance is None:
        tolerance = 1e-12 * max(1e-300, float(np.max(np.abs(table))))
    keep = (np.abs(table) > tolerance).astype(float)
    T = state.tensor_view()
    shape = [1] * T.ndim
    reg_ax = state.layout.index(record.register)
    shape[reg_ax] = keep.shape[1]
    if record.control is not None:
        c_ax = state.layout.index(record.control)
        shape[c_ax] = keep.shape[0]
        mask = keep.reshape(shape) if c_ax < reg_ax else keep.T.reshape(shape)
    else:
        mask = keep[0].reshape(shape)
    amps = (T * mask).reshape(-1)
    prob = float(np.vdot(amps, amps).real)
    if prob < IMPOSSIBLE_FLOOR:
        raise DegeneracyError("all weight sits on zero eigenvalues: y is orthogonal to the column space")
    return PostselectRecord(prob, PureState(amps / np.sqrt(prob), state.layout), "eigenvalue!=0", _snapshot(counters))


def zero_slot_weight(record: PhaseEstimateRecord, tolerance: Optional[float] = None) -> float:
    table = record.decoded_table()
    if tolerance is None:
        tolerance = 1e-12 * max(1e-300, float(np.max(np.abs(table))))
    return float(np.sum(record.weights[np.abs(table) <= tolerance]))


def restrict_register(
    state: PureState,
    register: str,
    indices: Sequence[int],
    new_name: Optional[str] = None,
    counters: Optional[OracleCounters] = None,
) -> PostselectRecord:
    """Project `register` onto the span of the given basis states."""
    ax = state.layout.index(register)
    idx = list(indices)
    branch = np.take(state.tensor_view(), idx, axis=ax)
    amps = branch.reshape(-1)
    prob = float(np.vdot(amps, amps).real)
    if prob < IMPOSSIBLE_FLOOR:
        raise ImpossibleOutcomeError(f"register {register!r} has no weight on {idx[:4]}...")
    layout = state.layout.resized(register, len(idx), new_name)
    return PostselectRecord(prob, PureState(amps / np.sqrt(prob), layout),
                            f"{register} in subset", _snapshot(counters))


def project_register(
    state: PureState,
    register: str,
    vector,
    counters: Optional[OracleCounters] = None,
) -> PostselectRecord:
    """Project `register` onto the normalized `vector` and drop it."""
    ax = state.layout.index(register)
    vec = np.asarray(vector, dtype=complex).reshape(-1)
    if vec.size != state.layout.dims[ax]:
        raise InputError(f"projection vector has {vec.size} entries, register {register!r} has {state.layout.dims[ax]}")
    vec = vec / np.linalg.norm(vec)
    branch = np.tensordot(state.tensor_view(), vec.conj(), axes=([ax], [0]))
    amps = branch.reshape(-1)
    prob = float(np.vdot(amps, amps).real)
    if prob < IMPOSSIBLE_FLOOR:
        raise ImpossibleOutcomeError(f"projection of {register!r} has probability {prob:.3e}")
    return PostselectRecord(prob, PureState(amps / np.sqrt(prob), state.layout.without(register)),
                            f"{register}=target", _snapshot(counters))


# ---------------------------------------------------------------------------
# 4. Amplitude amplification and estimation (closed form)
# ---------------------------------------------------------------------------


def amplitude_amplify_count(P: float) -> int:
    if not 0.0 < P <= 1.0:
        raise InputError(f"success probability must lie in (0, 1], got {P}")
    return max(1, math.ceil(math.pi / (4.0 * math.asin(math.sqrt(P)))))


def amplitude_estimate(P: float, rel_err: float, noise: NoiseModel = EXACT) -> Tuple[float, int]:
    """Estimate of P with the repetition count of amplitude estimation at relative error rel_err."""
    if not 0.0 < P <= 1.0:
        raise InputError(f"probability must lie in (0, 1], got {P}")
    if rel_err <= 0.0:
        raise InputError(f"relative error must be > 0, got {rel_err}")
    reps = max(1, math.ceil(math.sqrt((1.0 - P) / P) / rel_err))
    return P * noise.relative_factor(rel_err), reps


# ---------------------------------------------------------------------------
# 5. Overlap tests
# ---------------------------------------------------------------------------


def swap_test(a: PureState, b: PureState) -> float:
    """Probability of the swap-test ancilla reading 0: 1/2 + |<a|b>|²/2."""
    ov = a.inner(b)
    return 0.5 + 0.5 * abs(ov) ** 2


def signed_overlap_test(a: PureState, b: PureState, atol: float = 1e-12) -> float:
    """
    <a|b> with its sign, from the ancilla state (|0>a + |1>b)/√2 measured
    against (|0> - |1>)/√2, which fires with probability (1 - <a|b>)/2.
    """
    if a.dim != b.dim:
        raise InputError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if np.max(np.abs(a.amplitudes.imag)) > atol or np.max(np.abs(b.amplitudes.imag)) > atol:
        raise ContractError("signed overlap needs real-amplitude states")
    p_minus = 0.5 * (1.0 - float(np.dot(a.amplitudes.real, b.amplitudes.real)))
    return 1.0 - 2.0 * p_minus


def oracle_counters(counters: OracleCounters) -> Dict[str, int]:
    return counters.snapshot()
