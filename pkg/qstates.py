"""
Register layouts, pure and mixed states, oracle counters and the injected-noise model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

import numkit
from qridge_errors import ContractError, InputError

NORM_ATOL = 1e-10

COUNTER_KEYS = ("O_X", "O_y", "O_X_inv", "hamsim_steps")


@dataclass(frozen=True)
class RegisterLayout:
    registers: Tuple[Tuple[str, int], ...]

    def __post_init__(self):
        regs = tuple((str(n), int(d)) for n, d in self.registers)
        names = [n for n, _ in regs]
        if len(set(names)) != len(names):
            raise InputError(f"duplicate register names in {names}")
        if any(d < 1 for _, d in regs):
            raise InputError(f"register dimensions must be >= 1: {regs}")
        object.__setattr__(self, "registers", regs)

    @classmethod
    def of(cls, *registers: Tuple[str, int]) -> "RegisterLayout":
        return cls(tuple(registers))

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(n for n, _ in self.registers)

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(d for _, d in self.registers)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims)) if self.registers else 1

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise InputError(f"no register named {name!r} in {self.names}") from None

    def size(self, name: str) -> int:
        return self.dims[self.index(name)]

    def append(self, name: str, dim: int) -> "RegisterLayout":
        return RegisterLayout(self.registers + ((name, dim),))

    def without(self, name: str) -> "RegisterLayout":
        i = self.index(name)
        return RegisterLayout(self.registers[:i] + self.registers[i + 1:])

    def resized(self, name: str, dim: int, new_name: Optional[str] = None) -> "RegisterLayout":
        i = self.index(name)
        regs = list(self.registers)
        regs[i] = (new_name or name, int(dim))
        return RegisterLayout(tuple(regs))

    def concat(self, other: "RegisterLayout") -> "RegisterLayout":
        return RegisterLayout(self.registers + other.registers)


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray
    layout: RegisterLayout

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex, copy=True).reshape(-1)
        if amps.size != self.layout.dim:
            raise InputError(
                f"state has {amps.size} amplitudes but layout {self.layout.registers} needs {self.layout.dim}"
            )
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > NORM_ATOL:
            raise ContractError(f"state norm {norm:.12f} is not 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_vector(cls, v, layout: Optional[RegisterLayout] = None, name: str = "system") -> "PureState":
        """Normalize v into a state; a zero vector is an input error."""
        v = np.asarray(v, dtype=complex).reshape(-1)
        norm = float(np.linalg.norm(v))
        if norm == 0.0:
            raise InputError("cannot normalize the zero vector")
        return cls(v / norm, layout or RegisterLayout.of((name, v.size)))

    @property
    def dim(self) -> int:
        return self.layout.dim

    def tensor_view(self) -> np.ndarray:
        return self.amplitudes.reshape(self.layout.dims)

    def tensor(self, other: "PureState") -> "PureState":
        return PureState(np.kron(self.amplitudes, other.amplitudes), self.layout.concat(other.layout))

    def inner(self, other: "PureState") -> complex:
        if self.dim != other.dim:
            raise InputError(f"dimension mismatch: {self.dim} vs {other.dim}")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def register_probabilities(self, name: str) -> np.ndarray:
        axis = self.layout.index(name)
        p = np.abs(self.tensor_view()) ** 2
        other = tuple(a for a in range(p.ndim) if a != axis)
        return p.sum(axis=other)

    def density(self) -> "MixedState":
        a = self.amplitudes
        return MixedState(np.outer(a, a.conj()), self.layout)


@dataclass(frozen=True, eq=False)
class MixedState:
    rho: np.ndarray
    layout: RegisterLayout

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex, copy=True)
        if rho.shape != (self.layout.dim, self.layout.dim):
            raise InputError(f"operator shape {rho.shape} does not match layout dim {self.layout.dim}")
        if not numkit.is_density_operator(rho):
            raise ContractError("operator is not a valid density operator")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    def tensor(self, other: "MixedState", budget: int = numkit.DIMENSION_BUDGET) -> "MixedState":
        return MixedState(numkit.kron(self.rho, other.rho, budget), self.layout.concat(other.layout))

    def reduce(self, keep: Iterable[str]) -> "MixedState":
        keep_idx = sorted(self.layout.index(n) for n in keep)
        rho = numkit.partial_trace(self.rho, self.layout.dims, keep_idx)
        layout = RegisterLayout(tuple(self.layout.registers[i] for i in keep_idx))
        return MixedState(rho, layout)


@dataclass
class OracleCounters:
    """Per-run call counters. Values only ever grow."""

    counts: Dict[str, int] = field(default_factory=lambda: {k: 0 for k in COUNTER_KEYS})

    def add(self, key: str, n: int = 1) -> None:
        if key not in self.counts:
            raise InputError(f"unknown oracle counter {key!r}")
        if n < 0:
            raise ContractError("oracle counters are monotone")
        self.counts[key] += int(n)

    def snapshot(self) -> Dict[str, int]:
        return dict(self.counts)

    def merge(self, other: "OracleCounters") -> None:
        for k, v in other.counts.items():
            self.add(k, v)


class NoiseModel:
    """Multiplicative estimation noise; a no-op unless enabled."""

    def __init__(self, seed: Optional[int] = None, enabled: bool = False):
        self.seed = seed
        self.enabled = enabled
        self.rng = np.random.default_rng(seed)

    def relative_factor(self, rel_err: float) -> float:
        if rel_err <= 0.0:
            raise InputError(f"relative error must be > 0, got {rel_err}")
        if not self.enabled:
            return 1.0
        return 1.0 + float(self.rng.uniform(-rel_err, rel_err))


EXACT = NoiseModel(enabled=False)
