"""Batch evaluation: manifest in, six scores per model out, reports on disk.

File formats
------------
Truth and training data are long-format CSV with columns
``window_id, t, time_value, var_0 .. var_{D-1}`` where ``t`` is the integer
step index inside the window and ``time_value`` the real timestamp.
Forecast samples use the same layout plus a ``sample_id`` column. The
manifest is JSON and names the dataset, the three kinds of files and the
evaluation config; relative paths resolve against the manifest's directory.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from ._validation import check_fraction, check_positive
from ._version import __version__
from .baselines import DECILE_LEVELS, ForecastInstance, score_instance
from .censoring import CensorModel, _censored_blocks, censor_weight
from .exceptions import NumericalError, ValidationError
from .mmd import mmd2_biased
from .paths import Trajectory, augment, augment_all
from .sigkernel import KernelConfig, gram

MANIFEST_SCHEMA = "sigscore.manifest"
REPORT_SCHEMA = "sigscore.report"
SCHEMA_VERSION = 1
BASE_COLUMNS = ("window_id", "t", "time_value")
METRIC_ORDER = ("ql", "crps", "es", "vs", "sig", "csig")


@dataclass(frozen=True)
class EvalConfig:
    """Evaluation knobs; everything downstream of the manifest reads these."""

    censor_quantile: float = 0.95
    sig_depth: int = 4
    kernel: KernelConfig = field(default_factory=KernelConfig)
    ql_levels: tuple[float, ...] = DECILE_LEVELS
    vs_p: float = 0.5
    seed: int = 0
    subsample: int | None = None
    pool_windows: bool = False
    sweep_quantiles: tuple[float, ...] | None = None

    def __post_init__(self):
        q = float(self.censor_quantile)
        if not 0.0 < q < 1.0:
            raise ValidationError(f"censor_quantile must lie in (0, 1), got {q}")
        object.__setattr__(self, "censor_quantile", q)
        if int(self.sig_depth) < 1:
            raise ValidationError("sig_depth must be at least 1")
        object.__setattr__(self, "sig_depth", int(self.sig_depth))
        levels = tuple(float(v) for v in self.ql_levels)
        for v in levels:
            if not 0.0 < v < 1.0:
                raise ValidationError(f"ql_levels must lie in (0, 1), got {v}")
        object.__setattr__(self, "ql_levels", levels)
        check_positive(self.vs_p, "vs_p")
        if self.subsample is not None:
            if int(self.subsample) < 1:
                raise ValidationError("subsample must be at least 1")
            object.__setattr__(self, "subsample", int(self.subsample))
        if self.sweep_quantiles is not None:
            sweep = tuple(float(v) for v in self.sweep_quantiles)
            for v in sweep:
                check_fraction(v, "sweep quantile", open_left=False)
            object.__setattr__(self, "sweep_quantiles", sweep)

    def to_json(self) -> dict:
        return {
            "censor_quantile": self.censor_quantile,
            "sig_depth": self.sig_depth,
            "kernel": {
                "static_kernel": self.kernel.static_kernel,
                "bandwidth": self.kernel.bandwidth,
                "dyadic_order": self.kernel.dyadic_order,
            },
            "ql_levels": list(self.ql_levels),
            "vs_p": self.vs_p,
            "seed": self.seed,
            "subsample": self.subsample,
            "pool_windows": self.pool_windows,
            "sweep_quantiles": None if self.sweep_quantiles is None
            else list(self.sweep_quantiles),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "EvalConfig":
        doc = dict(doc)
        kernel = doc.pop("kernel", None)
        known = ("censor_quantile", "sig_depth", "ql_levels", "vs_p",
                 "seed", "subsample", "pool_windows", "sweep_quantiles")
        unknown = set(doc) - set(known)
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        # null means "use the default" for every key
        kwargs = {k: doc[k] for k in known if doc.get(k) is not None}
        if "ql_levels" in kwargs:
            kwargs["ql_levels"] = tuple(kwargs["ql_levels"])
        if "sweep_quantiles" in kwargs:
            kwargs["sweep_quantiles"] = tuple(kwargs["sweep_quantiles"])
        if kernel is not None:
            kwargs["kernel"] = KernelConfig(**kernel)
        return cls(**kwargs)


@dataclass(frozen=True)
class ModelEntry:
    name: str
    samples_path: Path


@dataclass(frozen=True)
class EvalManifest:
    dataset_name: str
    train_path: Path
    truth_path: Path
    models: tuple[ModelEntry, ...]
    config: EvalConfig = field(default_factory=EvalConfig)

    def __post_init__(self):
        if not self.models:
            raise ValidationError("manifest lists no models")
        names = [m.name for m in self.models]
        if len(set(names)) != len(names):
            raise ValidationError(f"model names are not unique: {names}")
        for p in (self.train_path, self.truth_path,
                  *(m.samples_path for m in self.models)):
            if not Path(p).is_file():
                raise ValidationError(f"manifest references missing file: {p}")


def load_manifest(path) -> EvalManifest:
    """Parse a manifest JSON file, resolving relative paths beside it."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValidationError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"manifest {path} is not valid JSON: {exc}") from exc
    if doc.get("schema") != MANIFEST_SCHEMA:
        raise ValidationError(f"not a manifest document: {doc.get('schema')!r}")
    if doc.get("version") != SCHEMA_VERSION:
        raise ValidationError(f"unsupported manifest version {doc.get('version')!r}")
    base = path.parent
    resolve = lambda p: (base / p) if not Path(p).is_absolute() else Path(p)
    try:
        models = tuple(
            ModelEntry(str(m["name"]), resolve(m["samples_path"]))
            for m in doc["models"]
        )
        return EvalManifest(
            dataset_name=str(doc["dataset_name"]),
            train_path=resolve(doc["train_path"]),
            truth_path=resolve(doc["truth_path"]),
            models=models,
            config=EvalConfig.from_json(doc.get("config", {})),
        )
    except KeyError as exc:
        raise ValidationError(f"manifest {path} is missing key {exc}") from exc


def _id_sort_key(value: str):
    try:
        return (0, int(value), value)
    except ValueError:
        return (1, 0, value)


def _var_columns(df: pd.DataFrame, path) -> list[str]:
    cols = [c for c in df.columns if c.startswith("var_")]
    expected = [f"var_{i}" for i in range(len(cols))]
    if not cols or sorted(cols) != sorted(expected):
        raise ValidationError(
            f"{path}: variate columns must be var_0..var_{{D-1}}, found {sorted(cols)}"
        )
    return expected


def _read_long_csv(path, with_samples: bool) -> pd.DataFrame:
    path = Path(path)
    required = list(BASE_COLUMNS) + (["sample_id"] if with_samples else [])
    try:
        df = pd.read_csv(path, dtype={"window_id": str, "sample_id": str},
                         float_precision="round_trip")
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    except (pd.errors.ParserError, ValueError) as exc:
        raise ValidationError(f"{path}: parse failure: {exc}") from exc
    for col in required:
        if col not in df.columns:
            raise ValidationError(f"{path}: missing column {col!r}")
    if df.empty:
        raise ValidationError(f"{path}: no rows")
    return df


def _window_block(g: pd.DataFrame, var_cols, path, wid) -> tuple[np.ndarray, np.ndarray]:
    g = g.sort_values("t", kind="stable")
    steps = g["t"].to_numpy()
    if not np.array_equal(steps, np.arange(len(steps))):
        raise ValidationError(f"{path}: window {wid}: t must run 0..T-1 without gaps")
    times = g["time_value"].to_numpy(dtype=np.float64)
    values = g[var_cols].to_numpy(dtype=np.float64)
    if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
        raise ValidationError(f"{path}: window {wid} contains non-finite values")
    if len(times) > 1 and not np.all(np.diff(times) > 0):
        raise ValidationError(f"{path}: window {wid}: times not strictly increasing")
    return times, values


def read_trajectory_csv(path) -> dict[str, Trajectory]:
    """Load a truth/train long-format CSV as window_id -> Trajectory."""
    df = _read_long_csv(path, with_samples=False)
    var_cols = _var_columns(df, path)
    out = {}
    for wid, g in df.groupby("window_id", sort=False):
        times, values = _window_block(g, var_cols, path, wid)
        out[wid] = Trajectory(values, times)
    return {wid: out[wid] for wid in sorted(out, key=_id_sort_key)}


def read_samples_csv(path) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Load a samples CSV as window_id -> (times (T,), values (S, T, D))."""
    df = _read_long_csv(path, with_samples=True)
    var_cols = _var_columns(df, path)
    out = {}
    expected_s = None
    for wid, g in df.groupby("window_id", sort=False):
        blocks = []
        times0 = None
        sample_ids = sorted(g["sample_id"].unique(), key=_id_sort_key)
        for sid in sample_ids:
            times, values = _window_block(
                g[g["sample_id"] == sid], var_cols, path, f"{wid} sample {sid}"
            )
            if times0 is None:
                times0 = times
            elif not np.array_equal(times, times0):
                raise ValidationError(
                    f"{path}: window {wid}: samples disagree on the time grid"
                )
            blocks.append(values)
        if len(blocks) < 2:
            raise ValidationError(
                f"{path}: window {wid}: unbiased estimation needs >= 2 samples"
            )
        if expected_s is None:
            expected_s = len(blocks)
        elif len(blocks) != expected_s:
            raise ValidationError(
                f"{path}: window {wid} has {len(blocks)} samples, expected {expected_s}"
            )
        out[wid] = (times0, np.stack(blocks))
    return {wid: out[wid] for wid in sorted(out, key=_id_sort_key)}


def write_trajectory_csv(trajectories, path) -> Path:
    """Write trajectories in the truth/train long format, one window each."""
    path = Path(path)
    rows = []
    for wid, traj in enumerate(trajectories):
        for t in range(traj.horizon):
            row = {"window_id": wid, "t": t, "time_value": traj.times[t]}
            for d in range(traj.variates):
                row[f"var_{d}"] = traj.values[t, d]
            rows.append(row)
    pd.DataFrame(rows).to_csv(path, index=False)
    return path


def write_samples_csv(window_samples, path) -> Path:
    """Write per-window sample blocks [(times (T,), values (S, T, D)), ...]."""
    path = Path(path)
    rows = []
    for wid, (times, values) in enumerate(window_samples):
        s_count, horizon, variates = values.shape
        for sid in range(s_count):
            for t in range(horizon):
                row = {"window_id": wid, "sample_id": sid,
                       "t": t, "time_value": times[t]}
                for d in range(variates):
                    row[f"var_{d}"] = values[sid, t, d]
                rows.append(row)
    pd.DataFrame(rows).to_csv(path, index=False)
    return path


def _ingest_full(manifest: EvalManifest):
    train = list(read_trajectory_csv(manifest.train_path).values())
    truth = read_trajectory_csv(manifest.truth_path)
    window_ids = list(truth)
    horizon = truth[window_ids[0]].horizon
    variates = truth[window_ids[0]].variates
    for wid, traj in truth.items():
        if traj.horizon != horizon or traj.variates != variates:
            raise ValidationError(
                f"{manifest.truth_path}: window {wid} has shape "
                f"({traj.horizon}, {traj.variates}), expected ({horizon}, {variates})"
            )
    for traj in train:
        if traj.variates != variates:
            raise ValidationError(
                f"{manifest.train_path}: training windows must have {variates} variates"
            )

    instances: dict[str, list[ForecastInstance]] = {}
    for entry in manifest.models:
        samples = read_samples_csv(entry.samples_path)
        missing = sorted(set(window_ids) - set(samples), key=_id_sort_key)
        extra = sorted(set(samples) - set(window_ids), key=_id_sort_key)
        if missing or extra:
            raise ValidationError(
                f"{entry.samples_path}: window mismatch with truth "
                f"(missing {missing}, extra {extra})"
            )
        rows = []
        for wid in window_ids:
            times, values = samples[wid]
            traj = truth[wid]
            if values.shape[1] != horizon or values.shape[2] != variates:
                raise ValidationError(
                    f"{entry.samples_path}: window {wid} has shape "
                    f"{values.shape[1:]}, expected ({horizon}, {variates})"
                )
            if not np.array_equal(times, traj.times):
                raise ValidationError(
                    f"{entry.samples_path}: window {wid}: times disagree with truth"
                )
            rows.append(ForecastInstance(traj.values, values, traj.times))
        instances[entry.name] = rows
    return train, instances, window_ids


def ingest(manifest: EvalManifest):
    """Validate and load everything the manifest references.

    Returns the training trajectories and, per model, one ForecastInstance
    per truth window (windows in a deterministic id order).
    """
    train, instances, _ = _ingest_full(manifest)
    return train, instances


def _subsample_indices(count: int, keep: int) -> list[int]:
    if keep >= count:
        return list(range(count))
    return [int(i) for i in np.linspace(0, count - 1, keep)]


def _window_paths(inst: ForecastInstance, norm) -> tuple[list[np.ndarray], np.ndarray]:
    sample_paths = augment_all(
        [Trajectory(s, inst.times) for s in inst.samples], norm
    )
    truth_path = augment(Trajectory(inst.truth, inst.times), norm)
    return sample_paths, truth_path


@dataclass
class ScoreReport:
    """Everything run_eval produced, in JSON-ready plain containers."""

    dataset: str
    metrics: list[str]
    models: list[str]
    window_ids: list[str]
    summary: dict
    per_window: dict
    outcomes: dict
    counts: dict
    config: dict
    quantile_sweep: list | None = None
    tool_version: str = __version__

    def to_json(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "version": SCHEMA_VERSION,
            "tool_version": self.tool_version,
            "dataset": self.dataset,
            "metrics": self.metrics,
            "models": self.models,
            "window_ids": self.window_ids,
            "summary": self.summary,
            "per_window": self.per_window,
            "outcomes": self.outcomes,
            "counts": self.counts,
            "config": self.config,
            "quantile_sweep": self.quantile_sweep,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ScoreReport":
        if doc.get("schema") != REPORT_SCHEMA:
            raise ValidationError(f"not a report document: {doc.get('schema')!r}")
        if doc.get("version") != SCHEMA_VERSION:
            raise ValidationError(f"unsupported report version {doc.get('version')!r}")
        return cls(
            dataset=doc["dataset"],
            metrics=list(doc["metrics"]),
            models=list(doc["models"]),
            window_ids=list(doc["window_ids"]),
            summary=doc["summary"],
            per_window=doc["per_window"],
            outcomes=doc["outcomes"],
            counts=doc["counts"],
            config=doc["config"],
            quantile_sweep=doc["quantile_sweep"],
            tool_version=doc["tool_version"],
        )


TIE_MARGIN = 1.01


def tally_outcomes(summary: dict, metrics, models) -> tuple[dict, dict]:
    """Win/tie/loss per metric under the 1% rule.

    The unique lowest score wins; anything within 1% of the minimum ties;
    the rest lose. When several models share the exact minimum nobody wins
    and all of them tie.
    """
    outcomes = {}
    for metric in metrics:
        values = {m: summary[m][metric] for m in models}
        lowest = min(values.values())
        winners = [m for m in models if values[m] == lowest]
        row = {}
        for m in models:
            if values[m] == lowest and len(winners) == 1:
                row[m] = "win"
            elif values[m] <= TIE_MARGIN * lowest:
                row[m] = "tie"
            else:
                row[m] = "loss"
        outcomes[metric] = row
    counts = {
        m: {
            "wins": sum(outcomes[mt][m] == "win" for mt in metrics),
            "ties": sum(outcomes[mt][m] == "tie" for mt in metrics),
            "losses": sum(outcomes[mt][m] == "loss" for mt in metrics),
        }
        for m in models
    }
    return outcomes, counts


def run_eval(manifest: EvalManifest) -> ScoreReport:
    """Score every model in the manifest against the shared truth windows.

    The censor model is fitted on the training windows; its normalization
    is reused for every kernel computation. Per window each model's S
    samples are compared against the single observed path (classical scores
    on the instance, signature scores as an S-vs-1 comparison), then
    averaged over windows; pool_windows instead merges all windows into one
    two-sample problem per model.
    """
    config = manifest.config
    train, instances, window_ids = _ingest_full(manifest)
    if config.subsample is not None:
        idx = _subsample_indices(len(window_ids), config.subsample)
        window_ids = [window_ids[i] for i in idx]
        instances = {name: [rows[i] for i in idx] for name, rows in instances.items()}

    censor = CensorModel(quantile=config.censor_quantile,
                         sig_depth=config.sig_depth, seed=config.seed).fit(train)
    kernel_cfg = config.kernel.resolved(augment_all(train, censor.norm_))

    models = [entry.name for entry in manifest.models]
    variates = instances[models[0]][0].variates
    metrics = [m for m in METRIC_ORDER if m != "vs" or variates >= 2]

    summary: dict = {}
    per_window: dict = {}
    sweep_state: list = []
    for name in models:
        rows = instances[name]
        window_scores: dict[str, list[float]] = {m: [] for m in metrics}
        pooled_samples: list[np.ndarray] = []
        pooled_truth: list[np.ndarray] = []
        for inst in rows:
            classical = score_instance(inst, config.ql_levels, config.vs_p)
            for key, value in classical.items():
                window_scores[key].append(float(value))
            sample_paths, truth_path = _window_paths(inst, censor.norm_)
            if config.pool_windows:
                pooled_samples.extend(sample_paths)
                pooled_truth.append(truth_path)
                continue
            gxx = gram(sample_paths, cfg=kernel_cfg, include_pivot=True)
            gyy = gram([truth_path], cfg=kernel_cfg, include_pivot=True)
            gxy = gram(sample_paths, [truth_path], cfg=kernel_cfg, include_pivot=True)
            sig_value = mmd2_biased(gxx.matrix, gyy.matrix, gxy.matrix)
            wx = censor.weights(sample_paths)
            wy = censor.weights([truth_path])
            csig_value = _censored_value(gxx, gyy, gxy, wx, wy)
            window_scores["sig"].append(sig_value)
            window_scores["csig"].append(csig_value)
            if config.sweep_quantiles is not None:
                sweep_state.append(
                    (name, gxx, gyy, gxy, sig_value,
                     censor.distances(sample_paths) / censor.dist_scale_,
                     censor.distances([truth_path]) / censor.dist_scale_)
                )
        if config.pool_windows:
            gxx = gram(pooled_samples, cfg=kernel_cfg, include_pivot=True)
            gyy = gram(pooled_truth, cfg=kernel_cfg, include_pivot=True)
            gxy = gram(pooled_samples, pooled_truth, cfg=kernel_cfg, include_pivot=True)
            sig_value = mmd2_biased(gxx.matrix, gyy.matrix, gxy.matrix)
            wx = censor.weights(pooled_samples)
            wy = censor.weights(pooled_truth)
            csig_value = _censored_value(gxx, gyy, gxy, wx, wy)
            if config.sweep_quantiles is not None:
                sweep_state.append(
                    (name, gxx, gyy, gxy, sig_value,
                     censor.distances(pooled_samples) / censor.dist_scale_,
                     censor.distances(pooled_truth) / censor.dist_scale_)
                )
        per_window[name] = {
            m: vals for m, vals in window_scores.items() if vals
        }
        model_summary = {}
        for m in metrics:
            if window_scores[m]:
                model_summary[m] = float(np.mean(window_scores[m]))
        if config.pool_windows:
            model_summary["sig"] = sig_value
            model_summary["csig"] = csig_value
        summary[name] = model_summary

    outcomes, counts = tally_outcomes(summary, metrics, models)
    sweep = None
    if config.sweep_quantiles is not None:
        sweep = _sweep_rows(sweep_state, censor, config.sweep_quantiles, models)
    return ScoreReport(
        dataset=manifest.dataset_name,
        metrics=metrics,
        models=models,
        window_ids=[str(w) for w in window_ids],
        summary=summary,
        per_window=per_window,
        outcomes=outcomes,
        counts=counts,
        config=config.to_json(),
        quantile_sweep=sweep,
    )


def _censored_value(gxx, gyy, gxy, wx, wy) -> float:
    return mmd2_biased(*_censored_blocks(gxx, gyy, gxy, wx, wy))


def _sweep_rows(state, censor: CensorModel, quantiles, models) -> list[dict]:
    """Recut the censoring threshold across quantiles, reusing every Gram."""
    rows = []
    for q in quantiles:
        recut = censor.with_quantile(q)
        for name in models:
            gaps = []
            sigs = []
            csigs = []
            for entry in state:
                if entry[0] != name:
                    continue
                _, gxx, gyy, gxy, sig_value, dx, dy = entry
                wx = np.atleast_1d(censor_weight(dx, recut))
                wy = np.atleast_1d(censor_weight(dy, recut))
                csig_value = _censored_value(gxx, gyy, gxy, wx, wy)
                sigs.append(sig_value)
                csigs.append(csig_value)
                gaps.append(abs(csig_value - sig_value))
            if sigs:
                rows.append({
                    "quantile": float(q),
                    "model": name,
                    "sig": float(np.mean(sigs)),
                    "csig": float(np.mean(csigs)),
                    "gap": float(np.mean(gaps)),
                })
    return rows


def _write_json(doc: dict, path: Path) -> None:
    try:
        text = json.dumps(doc, sort_keys=True, indent=2, allow_nan=False)
    except ValueError as exc:
        raise NumericalError(f"report contains non-finite values: {exc}") from exc
    path.write_text(text + "\n", encoding="utf-8")


def emit_report(report: ScoreReport, out_dir, plot: bool = True) -> list[Path]:
    """Write report.json, scores.csv, windows.csv and optional sweep files.

    Identical reports produce byte-identical JSON: keys are sorted, floats
    use shortest round-trip formatting and nothing time- or host-dependent
    is recorded.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    report_path = out / "report.json"
    _write_json(report.to_json(), report_path)
    written.append(report_path)

    score_rows = [
        {"metric": metric, "model": model,
         "value": report.summary[model][metric],
         "outcome": report.outcomes[metric][model]}
        for metric in report.metrics
        for model in report.models
    ]
    scores_path = out / "scores.csv"
    pd.DataFrame(score_rows, columns=["metric", "model", "value", "outcome"]).to_csv(
        scores_path, index=False
    )
    written.append(scores_path)

    window_rows = [
        {"window_id": wid, "model": model, "metric": metric, "value": values[i]}
        for model in report.models
        for metric, values in sorted(report.per_window[model].items())
        for i, wid in enumerate(report.window_ids[: len(values)])
    ]
    windows_path = out / "windows.csv"
    pd.DataFrame(
        window_rows, columns=["window_id", "model", "metric", "value"]
    ).to_csv(windows_path, index=False)
    written.append(windows_path)

    if report.quantile_sweep:
        sweep_path = out / "quantile_sweep.csv"
        sweep_df = pd.DataFrame(
            report.quantile_sweep, columns=["quantile", "model", "sig", "csig", "gap"]
        )
        sweep_df.to_csv(sweep_path, index=False)
        written.append(sweep_path)
        if plot:
            png_path = out / "quantile_sweep.png"
            _plot_sweep(sweep_df, png_path)
            written.append(png_path)
    return written


def _plot_sweep(sweep_df: pd.DataFrame, out_path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for model, g in sweep_df.groupby("model", sort=True):
        g = g.sort_values("quantile")
        ax.plot(g["quantile"], g["gap"], marker="o", label=model)
    ax.set_xlabel("censoring quantile")
    ax.set_ylabel("|csig - sig|")
    ax.set_title("censored score converges to the plain score")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
