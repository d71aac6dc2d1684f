"""
Experiment orchestration and machine-readable reports.

A report is one JSON document (schema "qridge-report/1") plus one CSV side
file per table. Wall times go to a separate `<stem>.timings.json` so the main
report is byte-identical for identical config and seed.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

import numkit
from classical_ridge import (
    Dataset,
    FoldPartition,
    alpha_grid,
    default_alpha_range,
    fold_kappa_convention,
    fold_rank,
    partition_folds,
    solve_ridge_svd,
)
from dataset_io import (
    SyntheticSpec,
    export_csv,
    generate_synthetic,
    good_fit_instance,
    ingest_csv,
    random_dataset,
    reference_family,
)
from hamsim import (
    DEFAULT_CHANNEL_SAFETY,
    ChannelConfig,
    channel_error,
    default_test_states,
    embed_one_sparse,
    random_hermitian_family,
    step_count,
)
from logic import cost_models
from logic.bound_report import BoundReport
from logic.fold_bounds import (
    k_min_recommendation,
    p1_p2_goodfit_bounds,
    pw_lower_bound,
    rank_kappa_bound,
    w_fold_norm_bound,
    weyl_interval,
)
from logic.spectral_bounds import (
    g_max,
    grid_max_abs_g,
    grid_max_h,
    h_max,
    h_ratio_bound,
    h_ratio_empirical,
)
from qridge_errors import InputError, ReportIOError
from qrr_cv import Alg2Config, resolve_K, select_alpha_quantum
from qrr_fit import Alg1Config, algorithm1_run, predict_batch
from qstates import NoiseModel, OracleCounters

logger = logging.getLogger(__name__)

REPORT_SCHEMA = "qridge-report/1"
COMMANDS = ("cv", "fit", "sweep-fidelity", "sweep-channel", "bounds", "gen")


# ---------------------------------------------------------------------------
# 1. Configuration
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    command: str = "cv"
    data_path: Optional[str] = None
    y_path: Optional[str] = None
    generator: Optional[Dict[str, Any]] = None
    K: Optional[int] = None
    alpha_min: Optional[float] = None
    alpha_max: Optional[float] = None
    L: int = 5
    alphas: Optional[List[float]] = None
    alpha: Optional[float] = None
    s: int = 8
    eps: float = 0.05
    mode: str = "exact"
    readout: Optional[str] = None
    seed: int = 0
    out: Optional[str] = None
    dimension_budget: int = numkit.DIMENSION_BUDGET
    s_list: List[int] = field(default_factory=lambda: [4, 6, 8, 10])
    family_size: int = 8
    channel_Q: int = 2
    channel_N: int = 2
    channel_t: float = 1.0
    channel_epsilon: float = 0.05
    delta_t_list: List[float] = field(default_factory=lambda: [0.1, 0.03, 0.01, 0.003, 0.001])
    channel_safety: float = DEFAULT_CHANNEL_SAFETY

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InputError(f"unknown command {self.command!r}; expected one of {COMMANDS}")
        if self.mode not in ("exact", "noise"):
            raise InputError(f"mode must be 'exact' or 'noise', got {self.mode!r}")
        if self.readout not in (None, "qft", "exact"):
            raise InputError(f"readout must be 'qft' or 'exact', got {self.readout!r}")
        if self.s < 1 or self.eps <= 0 or self.L < 1:
            raise InputError("need s >= 1, eps > 0 and L >= 1")

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise InputError(f"unknown config keys: {unknown}")
        return cls(**raw)


def load_config(path: Optional[str] = None, **overrides) -> ExperimentConfig:
    raw: Dict[str, Any] = {}
    if path:
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise InputError(f"{path}: cannot read config ({exc.strerror or exc})") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from None
        if not isinstance(raw, dict):
            raise InputError(f"{path}: config must be a JSON object")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(raw)


# ---------------------------------------------------------------------------
# 2. Report
# ---------------------------------------------------------------------------


@dataclass
class RunReport:
    command: str
    config: Dict[str, Any]
    summary: Dict[str, Any] = field(default_factory=dict)
    bounds: List[Dict[str, Any]] = field(default_factory=list)
    counters: Dict[str, int] = field(default_factory=dict)
    tables: Dict[str, List[Dict[str, Any]]] = field(default_factory=dict)
    wall_times: Dict[str, float] = field(default_factory=dict)
    schema: str = REPORT_SCHEMA

    def document(self) -> Dict[str, Any]:
        return {
            "schema": self.schema,
            "command": self.command,
            "config": self.config,
            "summary": self.summary,
            "bounds": self.bounds,
            "counters": self.counters,
            "tables": self.tables,
        }


def _clean(value: Any) -> Any:
    """JSON-ready copy: numpy scalars to Python, non-finite floats rejected."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_clean(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        if not math.isfinite(v):
            raise InputError("report contains a non-finite number")
        return v
    return value


def _atomic_write(path: Path, text: str) -> None:
    directory = path.parent if str(path.parent) else Path(".")
    try:
        directory.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise ReportIOError(path, exc.strerror or str(exc)) from None


def _table_csv(rows: List[Dict[str, Any]]) -> str:
    if not rows:
        return ""
    columns: List[str] = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    lines: List[List[str]] = [columns]
    for row in rows:
        lines.append([_csv_cell(row.get(c)) for c in columns])
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(lines)
    return buf.getvalue()


def _csv_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (dict, list)):
        return json.dumps(value, sort_keys=True)
    return str(value)


def emit_report(report: RunReport, path) -> Dict[str, Path]:
    """
    Write `<path>` (JSON), `<stem>.<table>.csv` per table and `<stem>.timings.json`.

    Returns:
        mapping of artifact name to written path
    """
    path = Path(path)
    doc = _clean(report.document())
    text = json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"
    _atomic_write(path, text)
    written = {"report": path}
    stem = path.with_suffix("")
    for name, rows in sorted(report.tables.items()):
        table_path = Path(f"{stem}.{name}.csv")
        _atomic_write(table_path, _table_csv(_clean(rows)))
        written[name] = table_path
    timings = Path(f"{stem}.timings.json")
    _atomic_write(timings, json.dumps(_clean(report.wall_times), indent=2, sort_keys=True) + "\n")
    written["timings"] = timings
    return written


# ---------------------------------------------------------------------------
# 3. Helpers
# ---------------------------------------------------------------------------


def linear_trend(xs: Sequence[float], ys: Sequence[float]) -> Dict[str, float]:
    """Least-squares line through (xs, ys) with its coefficient of determination."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.size < 2:
        raise InputError("need at least two points for a trend")
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return {"slope": float(slope), "intercept": float(intercept), "r2": r2}


def cv_cost_models(d: Dataset, p: FoldPartition, L: int, eps: float) -> Dict[str, float]:
    """Quantum and classical CV cost models, each fold priced at its own κ' and rank."""
    kappa_fold = max(fold_kappa_convention(d, p, l) for l in range(p.K))
    ranks = [fold_rank(d, p, l) for l in range(p.K)]
    return {
        "quantum": cost_models.alg2_cost(L, d.NM, d.x_max, kappa_fold, d.kappa_convention, eps),
        "classical": cost_models.classical_cv_cost(L, d.N, d.M, ranks, eps),
    }


def oracle_calls_vs_grid_size(d: Dataset, p: FoldPartition, cfg2: Alg2Config, alphas: Sequence[float],
                              sizes: Sequence[int] = (1, 2, 3, 4, 5)) -> Dict[str, Any]:
    """O_X calls of the quantum CV sweep against the number of α candidates."""
    largest = max(sizes)
    grid = list(alphas) if len(alphas) >= largest else alpha_grid(*default_alpha_range(d), largest)
    calls = []
    for L in sizes:
        counters = OracleCounters()
        select_alpha_quantum(d, p, dataclasses.replace(cfg2, alphas=tuple(grid[:L]), L=L, noise=False),
                             counters, NoiseModel(enabled=False))
        calls.append(counters.snapshot().get("O_X", 0))
    trend = linear_trend(sizes, calls)
    logger.debug("oracle calls vs L: %s (r2=%.6f)", calls, trend["r2"])
    return {"L": list(sizes), "O_X": calls, **trend}


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.data_path:
        return ingest_csv(cfg.data_path, cfg.y_path)
    gen = dict(cfg.generator or {"kind": "random", "N": 8, "M": 3})
    kind = gen.pop("kind", "synthetic")
    if kind == "random":
        return random_dataset(int(gen.get("N", 8)), int(gen.get("M", 3)), seed=cfg.seed,
                              noise=float(gen.get("noise", 0.1)))
    if kind == "good_fit":
        d, _ = good_fit_instance(int(gen.get("N", 12)), int(gen.get("M", 3)),
                                 noise=float(gen.get("noise", 0.0)), seed=cfg.seed)
        return d
    if kind == "synthetic":
        try:
            spec = SyntheticSpec(**gen)
        except TypeError as exc:
            raise InputError(f"bad generator spec: {exc}") from None
        return generate_synthetic(spec, seed=cfg.seed)
    raise InputError(f"unknown generator kind {kind!r}")


def _dataset_summary(d: Dataset) -> Dict[str, Any]:
    meta = d.metadata()
    meta["kappa_convention"] = d.kappa_convention
    meta["k_min"] = k_min_recommendation(d)
    return meta


def _alphas(cfg: ExperimentConfig, d: Dataset) -> List[float]:
    if cfg.alphas:
        return [float(a) for a in cfg.alphas]
    lo, hi = default_alpha_range(d)
    return alpha_grid(cfg.alpha_min or lo, cfg.alpha_max or hi, cfg.L)


def _timed(times: Dict[str, float], key: str, fn: Callable, *args, **kwargs):
    start = time.perf_counter()
    try:
        return fn(*args, **kwargs)
    finally:
        times[key] = time.perf_counter() - start


# ---------------------------------------------------------------------------
# 4. Experiments
# ---------------------------------------------------------------------------


def run_cv_experiment(cfg: ExperimentConfig) -> RunReport:
    times: Dict[str, float] = {}
    d = load_dataset(cfg)
    alphas = _alphas(cfg, d)
    cfg2 = Alg2Config(K=cfg.K, alphas=tuple(alphas), L=len(alphas), s=cfg.s, eps=cfg.eps,
                      readout=cfg.readout or "exact", noise=cfg.mode == "noise", seed=cfg.seed)
    K = resolve_K(d, cfg2)
    p = partition_folds(d.N, K)
    counters = OracleCounters()
    noise = NoiseModel(cfg.seed, enabled=cfg.mode == "noise")
    cv = _timed(times, "cv", select_alpha_quantum, d, p, cfg2, counters, noise)

    bounds = [pw_lower_bound(d, p, r.alpha, r.C2) for r in cv.rows]
    bounds += [weyl_interval(d, p, l)[2] for l in range(p.K)]
    bounds.append(rank_kappa_bound(d))
    summary = {
        "dataset": _dataset_summary(d),
        "K": K,
        "alphas": alphas,
        "alpha_hat_quantum": cv.alpha_hat_quantum,
        "alpha_hat_classical": cv.alpha_hat_classical,
        "alpha_agreement": cv.agree,
        "mode": cfg.mode,
        "cost_model": cv_cost_models(d, p, len(alphas), cfg.eps),
        "oracle_calls_vs_L": oracle_calls_vs_grid_size(d, p, cfg2, alphas),
    }
    return RunReport(
        command="cv",
        config=cfg.to_dict(),
        summary=summary,
        bounds=[b.to_dict() for b in bounds],
        counters=counters.snapshot(),
        tables={"cv": [r.to_dict() for r in cv.rows]},
        wall_times=times,
    )


def run_fit_experiment(cfg: ExperimentConfig) -> RunReport:
    times: Dict[str, float] = {}
    d = load_dataset(cfg)
    alpha = cfg.alpha if cfg.alpha is not None else default_alpha_range(d)[1] / 5.0
    cfg1 = Alg1Config(alpha=alpha, s=cfg.s, eps=cfg.eps, readout=cfg.readout or "qft",
                      noise=cfg.mode == "noise", seed=cfg.seed)
    counters = OracleCounters()
    out = _timed(times, "fit", algorithm1_run, d, cfg1, counters)
    w = solve_ridge_svd(d, alpha).w
    rows = [
        {"row": i, "prediction": float(q), "classical": float(c)}
        for i, (q, c) in enumerate(zip(predict_batch(out, d.X), d.X @ w))
    ]
    summary = {
        "dataset": _dataset_summary(d),
        "fit": out.summary(),
        "w_norm_sq_classical": float(w @ w),
        "mode": cfg.mode,
        "cost_model": {
            "state": cost_models.alg1_state_cost(d.NM, d.x_max, d.kappa_convention, cfg.eps),
            "w_norm": cost_models.w_norm_cost(d.NM, d.x_max, d.kappa_convention, cfg.eps),
        },
    }
    return RunReport(command="fit", config=cfg.to_dict(), summary=summary,
                     bounds=[rank_kappa_bound(d).to_dict()], counters=counters.snapshot(),
                     tables={"predictions": rows}, wall_times=times)


def run_fidelity_sweep(cfg: ExperimentConfig, s_list: Optional[Sequence[int]] = None) -> RunReport:
    """Algorithm-1 fidelity per phase-bit count, median over the reference family."""
    s_list = list(s_list or cfg.s_list)
    times: Dict[str, float] = {}
    family = [load_dataset(cfg)] if (cfg.data_path or cfg.generator) else reference_family(cfg.family_size, cfg.seed)
    rows = []
    medians = []
    for s in s_list:
        fids, succ, steps = [], [], []
        start = time.perf_counter()
        for d in family:
            alpha = cfg.alpha if cfg.alpha is not None else float(d.NM) ** 2 / (4.0 * d.kappa ** 2)
            counters = OracleCounters()
            out = algorithm1_run(d, Alg1Config(alpha=alpha, s=s, eps=cfg.eps, readout=cfg.readout or "qft",
                                               noise=cfg.mode == "noise", seed=cfg.seed), counters)
            fids.append(out.fidelity)
            succ.append(out.success_prob)
            steps.append(out.counters["hamsim_steps"])
        times[f"s={s}"] = time.perf_counter() - start
        medians.append(float(np.median(fids)))
        rows.append({
            "s": s,
            "median_fidelity": medians[-1],
            "min_fidelity": float(np.min(fids)),
            "median_success": float(np.median(succ)),
            "hamsim_steps": int(steps[0]),
            "mode": cfg.mode,
        })
    trend = linear_trend([2 ** s for s in s_list], [r["hamsim_steps"] for r in rows]) if len(s_list) > 1 else None
    summary = {
        "instances": len(family),
        "median_nondecreasing": all(b >= a - 1e-12 for a, b in zip(medians, medians[1:])),
        "steps_vs_2s": trend,
    }
    return RunReport(command="sweep-fidelity", config=cfg.to_dict(), summary=summary,
                     tables={"fidelity": rows}, wall_times=times)


def run_channel_sweep(cfg: ExperimentConfig, delta_t_list: Optional[Sequence[float]] = None) -> RunReport:
    """Channel error per Δt at fixed t, the log-log slope, and the step_count check."""
    dts = list(delta_t_list or cfg.delta_t_list)
    Q, N, t = cfg.channel_Q, cfg.channel_N, cfg.channel_t
    times: Dict[str, float] = {}
    if cfg.generator and cfg.generator.get("kind") == "zero":
        A_list = [np.zeros((N, N)) for _ in range(Q)]
    else:
        A_list = random_hermitian_family(1, cfg.seed, (Q, Q), (N, N))[0]
    states = default_test_states(Q, N, cfg.seed)
    rows = []
    for dt in dts:
        n = max(1, int(round(t / dt)))
        start = time.perf_counter()
        err, _ = channel_error(A_list, ChannelConfig(t=t, n=n), states, budget=cfg.dimension_budget)
        times[f"dt={dt}"] = time.perf_counter() - start
        rows.append({"delta_t": t / n, "n": n, "error": err})

    positive = [r for r in rows if r["error"] > 0]
    slope = None
    if len(positive) >= 2:
        slope = linear_trend([math.log(r["delta_t"]) for r in positive],
                             [math.log(r["error"]) for r in positive])

    M_A = embed_one_sparse(A_list).M_A
    target = None
    if M_A > 0:
        n = step_count(M_A, t, cfg.channel_epsilon, cfg.channel_safety)
        err, _ = channel_error(A_list, ChannelConfig(t=t, n=n, epsilon_target=cfg.channel_epsilon), states,
                               budget=cfg.dimension_budget)
        target = {"n": n, "error": err, "epsilon": cfg.channel_epsilon, "met": err <= cfg.channel_epsilon}
        if not target["met"]:
            logger.warning("step_count n=%d missed epsilon=%g (error %.3e)", n, cfg.channel_epsilon, err)
    summary = {"Q": Q, "N": N, "t": t, "M_A": M_A, "loglog_fit": slope, "step_count_check": target}
    return RunReport(command="sweep-channel", config=cfg.to_dict(), summary=summary,
                     tables={"channel": rows}, wall_times=times)


def _spectral_rows(count: int, rng: np.random.Generator) -> Tuple[List[Dict[str, Any]], List[BoundReport]]:
    rows, reports = [], []
    for _ in range(count):
        nm = float(rng.integers(4, 29))
        kappa = float(rng.uniform(1.0, 10.0))
        alpha = float(np.exp(rng.uniform(np.log(nm * nm / (20 * kappa * kappa)), np.log(4 * nm * nm))))
        hm, hg = h_max(nm, kappa, alpha), grid_max_h(nm, kappa, alpha)
        gm, gg = g_max(nm, kappa, alpha), grid_max_abs_g(nm, kappa, alpha)
        ratio = h_ratio_empirical(nm, kappa, alpha, points=2_000)
        rows.append({"n_plus_m": nm, "kappa": kappa, "alpha": alpha,
                     "h_max": hm, "h_grid": hg, "g_max": gm, "g_grid": gg, "h_ratio": ratio})
        reports.append(BoundReport.upper("h_max_vs_grid", 1e-6, abs(hm - hg) / hg))
        reports.append(BoundReport.upper("g_max_vs_grid", 1e-6, abs(gm - gg) / gg))
        reports.append(BoundReport.upper("h_ratio", h_ratio_bound(kappa), ratio))
    return rows, reports


def run_bounds_suite(cfg: ExperimentConfig) -> RunReport:
    """Spectral case formulas against grid search, plus fold bounds on generated instances."""
    rng = np.random.default_rng(cfg.seed)
    times: Dict[str, float] = {}
    start = time.perf_counter()
    spectral_table, reports = _spectral_rows(200, rng)
    times["spectral"] = time.perf_counter() - start

    start = time.perf_counter()
    fold_rows = []
    for i, d in enumerate(reference_family(cfg.family_size, cfg.seed, N=6, M=3, kappa_max=6.0)):
        p = partition_folds(d.N, d.N)
        for l in range(p.K):
            reports.append(weyl_interval(d, p, l)[2])
        alpha = float(d.NM) ** 2 / (4.0 * d.kappa ** 2)
        for K in (2, 3):
            pk = partition_folds(d.N, K)
            pw = pw_lower_bound(d, pk, alpha, C2=1.0 / h_max(d.NM, max(
                fold_kappa_convention(d, pk, l) for l in range(K)), alpha))
            reports.append(pw)
            reports.append(w_fold_norm_bound(d, pk, alpha))
            fold_rows.append({"instance": i, "K": K, "P_w": pw.empirical_value, "P_w_floor": pw.analytic_value})
        reports.append(rank_kappa_bound(d))
    for i in range(cfg.family_size):
        d, _ = good_fit_instance(12, 3, noise=0.01, seed=cfg.seed + i)
        reports.append(p1_p2_goodfit_bounds(d, partition_folds(d.N, 4), 1e-6 * d.NM ** 2))
        noisy = random_dataset(8, 3, seed=cfg.seed + i, noise=1.0)
        reports.append(w_fold_norm_bound(noisy, partition_folds(noisy.N, 4), 1.0))
    times["folds"] = time.perf_counter() - start

    applicable = [r for r in reports if r.applicable]
    summary = {
        "reports": len(reports),
        "applicable": len(applicable),
        "all_satisfied": all(r.satisfied for r in reports),
        "failures": sorted({r.name for r in reports if not r.satisfied}),
    }
    return RunReport(command="bounds", config=cfg.to_dict(), summary=summary,
                     bounds=[r.to_dict() for r in reports],
                     tables={"spectral": spectral_table, "folds": fold_rows}, wall_times=times)


def run_generate(cfg: ExperimentConfig) -> RunReport:
    d = load_dataset(cfg)
    summary = {"dataset": _dataset_summary(d)}
    if cfg.out:
        data_path = Path(cfg.out).with_suffix(".csv")
        export_csv(d, data_path)
        summary["data_path"] = str(data_path)
    return RunReport(command="gen", config=cfg.to_dict(), summary=summary)


RUNNERS: Dict[str, Callable[[ExperimentConfig], RunReport]] = {
    "cv": run_cv_experiment,
    "fit": run_fit_experiment,
    "sweep-fidelity": run_fidelity_sweep,
    "sweep-channel": run_channel_sweep,
    "bounds": run_bounds_suite,
    "gen": run_generate,
}


def run(cfg: ExperimentConfig) -> RunReport:
    logger.info("running %s with seed %d in %s mode", cfg.command, cfg.seed, cfg.mode)
    return RUNNERS[cfg.command](cfg)
