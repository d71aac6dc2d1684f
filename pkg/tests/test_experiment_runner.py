import json

import numpy as np
import pytest

from classical_ridge import Dataset, fold_rank, partition_folds
from dataset_io import ingest_csv
from experiment_runner import (
    REPORT_SCHEMA,
    ExperimentConfig,
    RunReport,
    cv_cost_models,
    emit_report,
    linear_trend,
    load_config,
    run,
    run_channel_sweep,
)
from logic import cost_models
from qridge_errors import InputError, ReportIOError


def _fit_config(out=None):
    return ExperimentConfig(command="fit", generator={"kind": "random", "N": 6, "M": 2},
                            readout="exact", seed=3, out=out)


def test_config_validation():
    with pytest.raises(InputError, match="unknown config keys"):
        ExperimentConfig.from_dict({"command": "cv", "colour": "blue"})
    with pytest.raises(InputError):
        ExperimentConfig(command="plot")
    with pytest.raises(InputError):
        ExperimentConfig(mode="noisy")
    with pytest.raises(InputError):
        ExperimentConfig(readout="hadamard")


def test_load_config_merges_overrides(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"command": "fit", "seed": 5, "s": 6}))
    cfg = load_config(str(path), seed=9, alpha=None)
    assert cfg.command == "fit" and cfg.seed == 9 and cfg.s == 6
    assert cfg.alpha is None


def test_load_config_reports_json_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "seed": ,\n}\n')
    with pytest.raises(InputError, match=r"broken\.json:2:\d+: invalid JSON"):
        load_config(str(path))
    path.write_text("[1, 2]")
    with pytest.raises(InputError, match="JSON object"):
        load_config(str(path))


def test_fit_report_is_byte_identical_across_runs(tmp_path):
    first = emit_report(run(_fit_config()), tmp_path / "a" / "fit.json")
    second = emit_report(run(_fit_config()), tmp_path / "b" / "fit.json")
    assert first["report"].read_bytes() == second["report"].read_bytes()
    assert first["predictions"].name == "fit.predictions.csv"
    assert first["timings"].name == "fit.timings.json"
    doc = json.loads(first["report"].read_text())
    assert doc["schema"] == REPORT_SCHEMA
    assert doc["command"] == "fit"
    header = first["predictions"].read_text().splitlines()[0]
    assert header == "row,prediction,classical"
    rows = doc["tables"]["predictions"]
    assert all(r["prediction"] == pytest.approx(r["classical"], abs=1e-6) for r in rows)


def test_emit_rejects_non_finite_and_unwritable(tmp_path):
    with pytest.raises(InputError, match="non-finite"):
        emit_report(RunReport(command="fit", config={}, summary={"x": float("nan")}), tmp_path / "r.json")
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(ReportIOError):
        emit_report(RunReport(command="fit", config={}), blocker / "r.json")


def test_linear_trend():
    fit = linear_trend([1, 2, 3, 4], [3, 5, 7, 9])
    assert fit["slope"] == pytest.approx(2.0)
    assert fit["intercept"] == pytest.approx(1.0)
    assert fit["r2"] == pytest.approx(1.0)
    with pytest.raises(InputError):
        linear_trend([1.0], [2.0])


def test_cv_experiment_agrees_in_exact_mode():
    cfg = ExperimentConfig(command="cv", generator={"kind": "random", "N": 6, "M": 2},
                           K=3, alphas=[0.5, 3.0, 20.0], seed=1)
    report = run(cfg)
    assert report.summary["alpha_agreement"]
    assert len(report.tables["cv"]) == 3
    assert report.counters["O_X"] > 0
    assert report.summary["cost_model"]["quantum"] > 0


def test_cv_oracle_calls_grow_linearly_in_grid_size():
    cfg = ExperimentConfig(command="cv", generator={"kind": "random", "N": 6, "M": 2},
                           K=3, alphas=[0.5, 3.0, 20.0], s=4, seed=1)
    trend = run(cfg).summary["oracle_calls_vs_L"]
    assert trend["L"] == [1, 2, 3, 4, 5]
    assert trend["slope"] > 0
    assert trend["r2"] >= 0.99


def test_cv_cost_model_uses_fold_ranks():
    # the second feature lives only in rows 0 and 1, so fold 0 loses it
    X = np.array([[1.0, 1.0], [0.5, -1.0], [1.0, 0.0], [-1.0, 0.0], [2.0, 0.0], [0.3, 0.0]])
    d = Dataset(X, np.array([1.0, -0.4, 0.8, -1.1, 2.1, 0.2]))
    p = partition_folds(d.N, 3)
    ranks = [fold_rank(d, p, l) for l in range(p.K)]
    assert ranks == [1, 2, 2]
    costs = cv_cost_models(d, p, 2, 0.05)
    assert costs["classical"] == pytest.approx(cost_models.classical_cv_cost(2, d.N, d.M, ranks, 0.05))
    assert costs["classical"] < cost_models.classical_cv_cost(2, d.N, d.M, [d.rank] * p.K, 0.05)


def test_fidelity_sweep_steps_follow_phase_register():
    cfg = ExperimentConfig(command="sweep-fidelity", s_list=[4, 6], family_size=2, seed=2)
    report = run(cfg)
    steps = [row["hamsim_steps"] for row in report.tables["fidelity"]]
    assert steps == [2 * (2 ** 4 - 1), 2 * (2 ** 6 - 1)]
    assert report.summary["steps_vs_2s"]["slope"] == pytest.approx(2.0)


def test_channel_sweep_slope_and_step_count():
    cfg = ExperimentConfig(command="sweep-channel", delta_t_list=[0.1, 0.03, 0.01], seed=0)
    report = run_channel_sweep(cfg)
    assert 0.7 <= report.summary["loglog_fit"]["slope"] <= 1.3
    assert report.summary["step_count_check"]["met"]


def test_channel_sweep_zero_hamiltonians():
    cfg = ExperimentConfig(command="sweep-channel", generator={"kind": "zero"}, delta_t_list=[0.1, 0.01])
    report = run(cfg)
    assert all(row["error"] < 1e-12 for row in report.tables["channel"])
    assert report.summary["step_count_check"] is None


def test_bounds_suite_all_satisfied():
    report = run(ExperimentConfig(command="bounds", family_size=2, seed=4))
    assert report.summary["all_satisfied"], report.summary["failures"]
    assert len(report.tables["spectral"]) == 200


def test_generate_exports_dataset(tmp_path):
    out = tmp_path / "gen.json"
    report = run(ExperimentConfig(command="gen", generator={"kind": "good_fit", "N": 8, "M": 2}, out=str(out)))
    d = ingest_csv(report.summary["data_path"])
    assert d.N == 8 and d.M == 2
    assert report.summary["dataset"]["rank"] == 2
