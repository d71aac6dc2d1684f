import json

from run_qridge import build_parser, main


def test_gen_writes_report_and_data(tmp_path, capsys):
    out = tmp_path / "data.json"
    assert main(["gen", "--N", "6", "--M", "2", "--seed", "1", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["command"] == "gen"
    assert doc["config"]["generator"] == {"kind": "random", "N": 6, "M": 2}
    assert (tmp_path / "data.csv").exists()
    assert (tmp_path / "data.timings.json").exists()
    assert capsys.readouterr().out.startswith("gen: ")


def test_fit_from_csv(tmp_path, capsys):
    data = tmp_path / "train.csv"
    data.write_text("x0,x1,y\n1,0,1\n0,1,2\n1,1,3\n2,1,4\n")
    assert main(["fit", "--data", str(data), "--alpha", "1.0", "--readout", "exact"]) == 0
    assert "fit:" in capsys.readouterr().out


def test_bad_input_exits_2(tmp_path, capsys):
    assert main(["fit", "--data", str(tmp_path / "missing.csv")]) == 2
    assert "error:" in capsys.readouterr().err
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"unknown_key": 1}')
    assert main(["cv", "--config", str(cfg)]) == 2


def test_degenerate_outputs_exit_3(tmp_path):
    data = tmp_path / "orth.csv"
    # y lies entirely outside the column space of X
    data.write_text("2,0\n0,1\n")
    assert main(["fit", "--data", str(data), "--alpha", "1.0", "--readout", "exact"]) == 3


def test_dimension_budget_exits_4():
    assert main(["sweep-channel", "--Q", "2", "--N", "2", "--dimension-budget", "4"]) == 4


def test_channel_flags_reach_config():
    args = build_parser().parse_args(["sweep-channel", "--Q", "3", "--t", "0.5", "--delta-t", "0.1", "0.05"])
    assert args.channel_Q == 3
    assert args.channel_t == 0.5
    assert args.delta_t_list == [0.1, 0.05]
