"""End-to-end agreement between the bridge and the command-line evaluator.

The evaluator reads long-format CSV files; the bridge takes the same numbers
as in-memory arrays. Both must land on identical scores, so these tests run
the real `sigscore` command in a subprocess and replay every window through
score_window.
"""
import json
import subprocess
import sys

import numpy as np
import pandas as pd
import pytest

import pybridge as pb

PARITY_TOL = 1e-10


def _run_cli(*args):
    proc = subprocess.run([sys.executable, "-m", "sigscore.cli", *args],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc


def _read_frame(path):
    # round_trip parsing keeps the CSV -> array leg bit-exact
    return pd.read_csv(path, dtype={"window_id": str, "sample_id": str},
                       float_precision="round_trip")


def _trajectory_block(path):
    frame = _read_frame(path)
    var_cols = [c for c in frame.columns if c.startswith("var_")]
    wids = sorted(frame["window_id"].unique(), key=int)
    block = np.stack([
        frame[frame["window_id"] == w].sort_values("t")[var_cols].to_numpy()
        for w in wids
    ])
    first = frame[frame["window_id"] == wids[0]].sort_values("t")
    return wids, first["time_value"].to_numpy(), block


def _sample_blocks(path):
    frame = _read_frame(path)
    var_cols = [c for c in frame.columns if c.startswith("var_")]
    blocks = {}
    for wid in sorted(frame["window_id"].unique(), key=int):
        rows = frame[frame["window_id"] == wid]
        blocks[wid] = np.stack([
            rows[rows["sample_id"] == s].sort_values("t")[var_cols].to_numpy()
            for s in sorted(rows["sample_id"].unique(), key=int)
        ])
    return blocks


@pytest.fixture(scope="module")
def cli_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("parity")
    data = root / "data"
    out = root / "out"
    _run_cli("synth", "--experiment", "dependency", "--out", str(data),
             "--seed", "3", "--horizon", "8", "--windows", "4",
             "--samples", "8", "--train-windows", "48")
    _run_cli("eval", "--manifest", str(data / "manifest.json"),
             "--out", str(out), "--no-plot")
    manifest = json.loads((data / "manifest.json").read_text())
    report = json.loads((out / "report.json").read_text())
    return data, manifest, report


def test_bridge_matches_cli_per_window(cli_run):
    data, manifest, report = cli_run
    cfg = report["config"]
    _, train_times, train = _trajectory_block(data / manifest["train_path"])
    truth_ids, times, truth = _trajectory_block(data / manifest["truth_path"])
    assert truth_ids == report["window_ids"]

    worst = 0.0
    for entry in manifest["models"]:
        samples = _sample_blocks(data / entry["samples_path"])
        per_window = report["per_window"][entry["name"]]
        for k, wid in enumerate(truth_ids):
            got = pb.score_window(
                truth[k], samples[wid], times=times,
                train=train, train_times=train_times,
                quantile=cfg["censor_quantile"], sig_depth=cfg["sig_depth"],
                seed=cfg["seed"],
                static_kernel=cfg["kernel"]["static_kernel"],
                bandwidth=cfg["kernel"]["bandwidth"],
                dyadic_order=cfg["kernel"]["dyadic_order"],
            )
            assert list(got) == report["metrics"]
            for metric in report["metrics"]:
                worst = max(worst, abs(got[metric] - per_window[metric][k]))
    print(f"bridge vs CLI, max per-window score difference: {worst:.3e}")
    assert worst <= PARITY_TOL


def test_bridge_window_means_match_cli_summary(cli_run):
    data, manifest, report = cli_run
    cfg = report["config"]
    _, train_times, train = _trajectory_block(data / manifest["train_path"])
    truth_ids, times, truth = _trajectory_block(data / manifest["truth_path"])

    entry = manifest["models"][0]
    samples = _sample_blocks(data / entry["samples_path"])
    scored = [
        pb.score_window(truth[k], samples[wid], times=times,
                        train=train, train_times=train_times,
                        quantile=cfg["censor_quantile"],
                        sig_depth=cfg["sig_depth"], seed=cfg["seed"],
                        dyadic_order=cfg["kernel"]["dyadic_order"])
        for k, wid in enumerate(truth_ids)
    ]
    summary = report["summary"][entry["name"]]
    for metric in report["metrics"]:
        mean = float(np.mean([s[metric] for s in scored]))
        assert mean == pytest.approx(summary[metric], abs=PARITY_TOL)
