import csv
import json

import pytest

from signtn.cli import main
from signtn.errors import ConfigError, FormatError
from signtn.harness import (
    COMPLETE_MARKER,
    ExperimentConfig,
    emit_plot_data,
    load_config,
    read_rows,
    run_experiment,
    task_seed,
)


def run(tmp_path, experiment, name="out.csv", seed=3, workers=1, **params):
    cfg = ExperimentConfig(experiment, params, master_seed=seed, output_path=str(tmp_path / name), workers=workers)
    return run_experiment(cfg)


def test_entropy_scan_is_byte_identical_across_runs(tmp_path):
    kw = dict(trials=1, D=[2], lambdaD=[0.5], W=[2])
    a = run(tmp_path, "entropy", "a.csv", **kw)
    b = run(tmp_path, "entropy", "b.csv", **kw)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert a["rows"] == b["rows"] == 1


def test_worker_count_does_not_change_output(tmp_path):
    kw = dict(trials=2, D=[2], **{"lambda": [0.1, 1.0]}, W=[2], L=80, burn_in=10)
    run(tmp_path, "deltaf", "one.csv", **kw)
    run(tmp_path, "deltaf", "two.csv", workers=2, **kw)
    assert (tmp_path / "one.csv").read_bytes() == (tmp_path / "two.csv").read_bytes()


def test_adding_grid_points_keeps_existing_seeds():
    assert task_seed(1, "deltaf", 0, 0) == task_seed(1, "deltaf", 0, 0)
    assert task_seed(1, "deltaf", 0, 0) != task_seed(1, "deltaf", 0, 1)
    assert task_seed(1, "deltaf", 0, 0) != task_seed(1, "entropy", 0, 0)


def test_outputs_and_completion_marker(tmp_path):
    res = run(tmp_path, "statmech", **{"lambda": [0.25, 0.5]}, W=[2])
    text = (tmp_path / "out.csv").read_text(encoding="utf-8")
    assert text.splitlines()[-1] == COMPLETE_MARKER
    rows, complete = read_rows(res["raw"])
    assert complete and len(rows) == 2
    assert all(r["seed"] and r["experiment"] == "statmech" for r in rows)
    with open(res["agg"]) as fh:
        agg = list(csv.DictReader(fh))
    assert {"mean", "std", "stderr", "n"} <= set(agg[0])
    with open(res["timing"]) as fh:
        timing = list(csv.DictReader(fh))
    assert len(timing) == 2 and float(timing[0]["wall_time_ms"]) >= 0


def test_truncated_file_reads_as_incomplete(tmp_path):
    res = run(tmp_path, "statmech", **{"lambda": [0.25, 0.5]}, W=[2])
    lines = (tmp_path / "out.csv").read_text().splitlines()
    (tmp_path / "cut.csv").write_text("\n".join(lines[:2]) + "\n")
    rows, complete = read_rows(tmp_path / "cut.csv")
    assert not complete and len(rows) == 1
    assert res["rows"] == 2


def test_oracle_suite_deviation(tmp_path):
    res = run(tmp_path, "oracle", D=[2], **{"lambda": [0.5]})
    rows, _ = read_rows(res["raw"])
    assert len(rows) == 4
    assert max(float(r["rel_dev"]) for r in rows) < 1e-10


@pytest.mark.parametrize(
    "experiment,params,field",
    [
        ("deltaf", dict(D=[4], W=[12]), "W"),
        ("deltaf", dict(L=60, burn_in=20), "L"),
        ("deltaf", dict(W=[]), "W"),
        ("entropy", dict(chi=2, D=[3]), "chi"),
        ("entropy", dict(kind="bogus"), "kind"),
        ("statmech", dict(W=[30]), "W"),
        ("possum", dict(W=3), "W"),
        ("oracle", dict(D=[5]), "D"),
        ("gauge", dict(mode=["sideways"]), "mode"),
        ("peps", dict(trials=0), "trials"),
        ("peps", dict(colour=1), "colour"),
    ],
)
def test_invalid_config_names_the_field(experiment, params, field):
    with pytest.raises(ConfigError) as exc:
        ExperimentConfig(experiment, params)
    assert exc.value.field == field
    assert field in str(exc.value)


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"seed": 7, "params": {"D": [2], "W": [2]}, "trials": 3}))
    cfg = load_config(path, "peps", {"trials": 5, "out": "x.csv"})
    assert cfg.master_seed == 7
    assert cfg.params["trials"] == 5 and cfg.params["D"] == [2]
    assert cfg.output_path == "x.csv"
    with pytest.raises(ConfigError):
        load_config(path, "peps", {"nonsense": 1})
    path.write_text("{not json")
    with pytest.raises(ConfigError) as exc:
        load_config(path, "peps")
    assert exc.value.field == "config"


def test_plot_round_trip(tmp_path):
    res = run(tmp_path, "entropy", trials=2, D=[2], lambdaD=[0.25, 2.0], W=[2, 3])
    rows = emit_plot_data(res["raw"], "entropy", tmp_path / "p.csv")
    with open(tmp_path / "p.csv") as fh:
        back = list(csv.DictReader(fh))
    assert [r["series"] for r in back] == [r["series"] for r in rows]
    for r, b in zip(rows, back):
        assert float(b["x"]) == r["x"] and float(b["y"]) == r["y"] and float(b["yerr"]) == r["yerr"]
    assert {r["series"] for r in rows} == {"W=2", "W=3"}
    assert {r["x"] for r in rows} == {0.25, 2.0}


def test_plot_constant_width_still_divides_by_width(tmp_path):
    res = run(tmp_path, "entropy", trials=1, D=[2], lambdaD=[0.25], W=[2])
    raw, _ = read_rows(res["raw"])
    (row,) = emit_plot_data(res["raw"], "entropy")
    assert row["y"] == pytest.approx(float(raw[0]["s2"]) / 2)


def test_deltaf_plot_has_one_series_per_bond_dimension(tmp_path):
    res = run(tmp_path, "deltaf", trials=1, D=[2, 3], **{"lambda": [0.5]}, W=[2], L=70, burn_in=10)
    rows = emit_plot_data(res["raw"], "deltaf")
    assert sorted(r["series"] for r in rows) == ["D=2", "D=3"]


def test_plot_errors(tmp_path):
    res = run(tmp_path, "statmech", **{"lambda": [0.25]}, W=[2])
    with pytest.raises(FormatError):
        emit_plot_data(res["raw"], "entropy")
    with pytest.raises(FormatError):
        emit_plot_data(res["raw"], "histogram")


def test_cli_runs_and_reports_paths(tmp_path, capsys):
    out = tmp_path / "c.csv"
    code = main(["statmech", "--seed", "2", "--out", str(out), "--D", "3", "--lambda", "0.2", "--W", "2", "--plot", "statmech"])
    assert code == 0
    info = json.loads(capsys.readouterr().out)
    assert info["raw"] == str(out)
    assert out.with_suffix(".agg.csv").exists()
    assert out.with_suffix(".statmech.plot.csv").exists()


def test_cli_guard_violation_exits_nonzero(tmp_path, capsys):
    code = main(["deltaf", "--D", "4", "--W", "12", "--out", str(tmp_path / "x.csv")])
    assert code != 0
    assert "W" in capsys.readouterr().err
    assert not (tmp_path / "x.csv").exists()


def test_cli_rejects_unknown_plot_style(tmp_path, capsys):
    assert main(["statmech", "--W", "2", "--out", str(tmp_path / "y.csv"), "--plot", "nope"]) != 0
