"""
Dataset ingestion, export and synthetic generation.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from classical_ridge import Dataset
from qridge_errors import InputError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


# ---------------------------------------------------------------------------
# 1. CSV
# ---------------------------------------------------------------------------


def _parse_cell(text: str, path: Path, line: int, col: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise InputError(f"{path}:{line}:{col}: non-numeric cell {text!r}") from None
    if not math.isfinite(value):
        raise InputError(f"{path}:{line}:{col}: non-finite cell {text!r}")
    return value


def _looks_like_header(row: Sequence[str]) -> bool:
    # a mixed row is data with a bad cell, not a header
    for cell in row:
        try:
            float(cell)
        except ValueError:
            continue
        return False
    return True


def _read_table(path: PathLike) -> List[List[float]]:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            raw = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror or exc})") from None

    rows: List[List[float]] = []
    width: Optional[int] = None
    for line_no, row in enumerate(raw, start=1):
        cells = [c.strip() for c in row]
        if not cells or all(c == "" for c in cells):
            continue
        # only the first non-empty row may be a header
        if width is None and not rows and _looks_like_header(cells):
            width = len(cells)
            continue
        if width is None:
            width = len(cells)
        if len(cells) != width:
            raise InputError(f"{path}:{line_no}: ragged row with {len(cells)} cells, expected {width}")
        rows.append([_parse_cell(c, path, line_no, col) for col, c in enumerate(cells, start=1)])
    return rows


def ingest_csv(path: PathLike, y_path: Optional[PathLike] = None) -> Dataset:
    """
    Read a design matrix and outputs from CSV.

    Without `y_path` the last column is y; with it, the first file is X alone
    and the second holds one y value per row.
    """
    table = _read_table(path)
    if y_path is None:
        if table and len(table[0]) < 2:
            raise InputError(f"{path}: need at least one feature column and a y column")
        X = [row[:-1] for row in table]
        y = [row[-1] for row in table]
    else:
        X = table
        y_rows = _read_table(y_path)
        if any(len(r) != 1 for r in y_rows):
            raise InputError(f"{y_path}: y file must have exactly one column")
        y = [r[0] for r in y_rows]
        if len(y) != len(X):
            raise InputError(f"{y_path}: {len(y)} y values for {len(X)} rows of X")
    if len(X) < 2:
        raise InputError(f"{path}: need at least 2 data rows, found {len(X)}")
    return Dataset(np.array(X, dtype=float), np.array(y, dtype=float))


def export_csv(d: Dataset, path: PathLike, header: bool = True) -> Path:
    """Write X with y as the last column; repr() keeps every float bit-exact."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            if header:
                writer.writerow([f"x{k}" for k in range(d.M)] + ["y"])
            for row, target in zip(d.X, d.y):
                writer.writerow([repr(float(v)) for v in row] + [repr(float(target))])
    except OSError as exc:
        raise InputError(f"{path}: cannot write ({exc.strerror or exc})") from None
    return path


# ---------------------------------------------------------------------------
# 2. Synthetic generation
# ---------------------------------------------------------------------------


@dataclass
class SyntheticSpec:
    """
    Planted spectrum λ_j with output weights β_j on the left singular vectors.

    y = ‖y‖ Σ_j β_j u_j + noise·‖y‖·g/√N, g standard normal.
    """

    N: int
    M: int
    singular_values: List[float]
    beta: Optional[List[float]] = None
    y_norm: float = 1.0
    noise: float = 0.0
    allow_outside_convention: bool = False
    kappa: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "M": self.M,
            "singular_values": list(self.singular_values),
            "beta": None if self.beta is None else list(self.beta),
            "y_norm": self.y_norm,
            "noise": self.noise,
            "allow_outside_convention": self.allow_outside_convention,
            "kappa": self.kappa,
        }


def _validate_spec(spec: SyntheticSpec) -> Tuple[np.ndarray, np.ndarray]:
    if spec.N < 2 or spec.M < 1:
        raise InputError(f"need N >= 2 and M >= 1, got {spec.N}, {spec.M}")
    lam = np.asarray(spec.singular_values, dtype=float)
    R = lam.size
    if R == 0 or R > min(spec.N, spec.M):
        raise InputError(f"need 1..{min(spec.N, spec.M)} singular values, got {R}")
    if np.any(~np.isfinite(lam)) or np.any(lam <= 0):
        raise InputError("planted singular values must be finite and positive")
    if not spec.allow_outside_convention:
        nm = spec.N + spec.M
        kappa = spec.kappa if spec.kappa is not None else lam.max() / lam.min()
        if lam.max() > nm * (1 + 1e-12) or lam.min() < nm / kappa * (1 - 1e-12):
            raise InputError(
                f"spectrum {lam.tolist()} outside [(N+M)/κ, N+M] = [{nm / kappa:g}, {nm}]"
            )
    beta = np.ones(R) / math.sqrt(R) if spec.beta is None else np.asarray(spec.beta, dtype=float)
    if beta.size != R:
        raise InputError(f"beta has {beta.size} entries for {R} singular values")
    if np.sum(beta ** 2) > 1 + 1e-12:
        raise InputError("Σ β_j² must not exceed 1")
    if spec.noise < 0 or spec.y_norm <= 0:
        raise InputError("noise must be >= 0 and y_norm > 0")
    return lam, beta


def _orthonormal(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(rows, cols)))
    return q * np.sign(np.diag(r))


def generate_synthetic(spec: SyntheticSpec, seed: int = 0) -> Dataset:
    """X = U diag(λ) Vᵀ with seeded orthonormal factors; y planted on the u_j."""
    lam, beta = _validate_spec(spec)
    rng = np.random.default_rng(seed)
    R = lam.size
    U = _orthonormal(rng, spec.N, spec.N)
    V = _orthonormal(rng, spec.M, R)
    X = (U[:, :R] * lam) @ V.T
    y = spec.y_norm * (U[:, :R] @ beta)
    rest = 1.0 - float(np.sum(beta ** 2))
    if rest > 1e-12 and spec.N > R:
        # remaining mass goes to the left null space so that ‖y‖ = y_norm
        tail = rng.normal(size=spec.N - R)
        y = y + spec.y_norm * math.sqrt(rest) * (U[:, R:] @ (tail / np.linalg.norm(tail)))
    if spec.noise > 0:
        y = y + spec.noise * spec.y_norm * rng.normal(size=spec.N) / math.sqrt(spec.N)
    return Dataset(X, y)


def good_fit_instance(N: int = 12, M: int = 3, noise: float = 0.0, seed: int = 0,
                      singular_values: Optional[Sequence[float]] = None) -> Tuple[Dataset, np.ndarray]:
    """
    y = X w* plus relative noise: cross-validation fits well at small α.

    Returns:
        (dataset, planted w*)
    """
    rng = np.random.default_rng(seed)
    if singular_values is None:
        singular_values = np.linspace(N + M, (N + M) / 2.0, M)
    lam = np.asarray(singular_values, dtype=float)
    U = _orthonormal(rng, N, M)
    V = _orthonormal(rng, M, M)
    X = (U * lam) @ V.T
    w_star = rng.normal(size=M)
    y = X @ w_star
    if noise > 0:
        y = y + noise * np.linalg.norm(y) * rng.normal(size=N) / math.sqrt(N)
    return Dataset(X, y), w_star


def random_dataset(N: int, M: int, seed: int = 0, noise: float = 0.1) -> Dataset:
    """Uniform(-1, 1) design with a planted linear response plus Gaussian noise."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(N, M))
    w = rng.normal(size=M)
    y = X @ w + noise * rng.normal(size=N)
    return Dataset(X, y)


def reference_family(count: int, seed: int = 0, N: int = 4, M: int = 3,
                     kappa_max: float = 4.0) -> List[Dataset]:
    """Random N×M instances with κ <= kappa_max, rejection-sampled from uniform(-1, 1)."""
    rng = np.random.default_rng(seed)
    out: List[Dataset] = []
    while len(out) < count:
        X = rng.uniform(-1.0, 1.0, size=(N, M))
        s = np.linalg.svd(X, compute_uv=False)
        if s[-1] <= 0 or s[0] / s[-1] > kappa_max:
            continue
        y = rng.uniform(-1.0, 1.0, size=N)
        out.append(Dataset(X, y))
    return out
