"""End-to-end runs of the command line interface."""
import json

import pandas as pd
import pytest

from sigscore.cli import main
from sigscore.exceptions import NumericalError


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_dependency")
    rc = main([
        "synth", "--experiment", "dependency", "--out", str(out),
        "--seed", "1", "--horizon", "5", "--windows", "2",
        "--samples", "4", "--train-windows", "24",
    ])
    assert rc == 0
    return out


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["--version"])
    assert excinfo.value.code == 0
    assert "sigscore" in capsys.readouterr().out


def test_synth_writes_dataset(synth_dir):
    names = {p.name for p in synth_dir.iterdir()}
    assert {"manifest.json", "train.csv", "truth.csv"} <= names
    assert {f"samples_F{i}.csv" for i in range(1, 5)} <= names
    doc = json.loads((synth_dir / "manifest.json").read_text(encoding="utf-8"))
    assert doc["dataset_name"] == "dependency-synthetic"
    assert [m["name"] for m in doc["models"]] == ["F1", "F2", "F3", "F4"]


def test_eval_end_to_end(synth_dir, tmp_path, capsys):
    out = tmp_path / "report"
    rc = main([
        "eval", "--manifest", str(synth_dir / "manifest.json"),
        "--out", str(out),
    ])
    assert rc == 0
    stdout = capsys.readouterr().out
    assert "dataset dependency-synthetic: 4 models, 2 windows" in stdout
    for metric in ("ql", "crps", "es", "vs", "sig", "csig"):
        assert f"  {metric}:" in stdout
    assert (out / "report.json").is_file()
    assert (out / "scores.csv").is_file()
    assert (out / "windows.csv").is_file()


def test_eval_overrides_and_sweep(synth_dir, tmp_path):
    out = tmp_path / "swept"
    rc = main([
        "eval", "--manifest", str(synth_dir / "manifest.json"),
        "--out", str(out), "--quantile", "0.5", "--seed", "3",
        "--subsample", "1", "--sweep", "0.1,0.9", "--dyadic-order", "0",
        "--no-plot",
    ])
    assert rc == 0
    assert (out / "quantile_sweep.csv").is_file()
    assert not (out / "quantile_sweep.png").exists()
    doc = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert doc["config"]["censor_quantile"] == 0.5
    assert doc["config"]["seed"] == 3
    assert doc["config"]["sweep_quantiles"] == [0.1, 0.9]
    assert doc["config"]["kernel"]["dyadic_order"] == 0
    assert len(doc["window_ids"]) == 1


def test_eval_missing_manifest_exits_2(tmp_path, capsys):
    rc = main(["eval", "--manifest", str(tmp_path / "nope.json"),
               "--out", str(tmp_path / "out")])
    assert rc == 2
    assert capsys.readouterr().err.startswith("error:")


def test_eval_numerical_failure_exits_3(synth_dir, tmp_path, capsys,
                                        monkeypatch):
    def explode(manifest):
        raise NumericalError("boom")

    monkeypatch.setattr("sigscore.cli.run_eval", explode)
    rc = main(["eval", "--manifest", str(synth_dir / "manifest.json"),
               "--out", str(tmp_path / "out")])
    assert rc == 3
    assert "numerical failure: boom" in capsys.readouterr().err


def test_synth_power_writes_pair(tmp_path):
    out = tmp_path / "power_data"
    rc = main(["synth", "--experiment", "power", "--out", str(out),
               "--scenario", "wrong_mean", "--d", "4", "--m", "6"])
    assert rc == 0
    assert (out / "truth.csv").is_file()
    assert (out / "forecast.csv").is_file()
    meta = json.loads((out / "meta.json").read_text(encoding="utf-8"))
    assert meta["scenario"] == "wrong_mean"
    assert meta["d"] == 4 and meta["m"] == 6


def test_synth_rejects_unknown_experiment():
    with pytest.raises(SystemExit) as excinfo:
        main(["synth", "--experiment", "bogus", "--out", "x"])
    assert excinfo.value.code == 2


def test_power_subcommand(tmp_path, capsys):
    out = tmp_path / "grid"
    rc = main([
        "power", "--scenario", "wrong_mean", "--dims", "4",
        "--sizes", "8,12", "--reps", "20", "--permutations", "100",
        "--seed", "5", "--out", str(out), "--heatmap",
    ])
    assert rc == 0
    stdout = capsys.readouterr().out
    assert "power" in stdout
    csv_path = out / "power_wrong_mean.csv"
    assert csv_path.is_file()
    assert (out / "power_wrong_mean.png").stat().st_size > 0
    df = pd.read_csv(csv_path)
    assert list(df.columns) == ["scenario", "metric", "alpha", "d", "m",
                                "reps", "power"]
    assert len(df) == 2
    assert df["power"].between(0.0, 1.0).all()


def test_power_heatmap_requires_out(capsys):
    rc = main(["power", "--scenario", "wrong_mean", "--dims", "4",
               "--sizes", "8", "--reps", "20", "--heatmap"])
    assert rc == 2
    assert "--heatmap needs --out" in capsys.readouterr().err


def test_power_rejects_bad_dims(capsys):
    rc = main(["power", "--scenario", "wrong_mean", "--dims", "4,x",
               "--sizes", "8", "--reps", "20"])
    assert rc == 2
    assert "comma-separated integers" in capsys.readouterr().err
