"""Command line entry points: eval, synth and power subcommands.

Exit codes: 0 on success, 2 on validation problems (bad arguments, bad
files, bad config), 3 on numerical failure.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from ._version import __version__
from .exceptions import NumericalError, ValidationError
from .harness import emit_report, load_manifest, run_eval
from .power import METRICS, PowerGrid, power_grid, render_heatmap
from .sigkernel import KernelConfig
from .synthetic import POWER_SCENARIOS
from .experiments import SYNTH_EXPERIMENTS, emit_synthetic


def _comma_ints(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part != ""]
    except ValueError as exc:
        raise ValidationError(f"expected comma-separated integers, got {text!r}") from exc


def _comma_floats(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part != ""]
    except ValueError as exc:
        raise ValidationError(f"expected comma-separated numbers, got {text!r}") from exc


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sigscore",
        description="Distribution-level forecast scoring with signature kernels.",
    )
    parser.add_argument("--version", action="version", version=f"sigscore {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", help="score every model in a manifest")
    p_eval.add_argument("--manifest", required=True, help="manifest JSON path")
    p_eval.add_argument("--out", required=True, help="output directory")
    p_eval.add_argument("--quantile", type=float, default=None,
                        help="override the censoring quantile")
    p_eval.add_argument("--seed", type=int, default=None, help="override the seed")
    p_eval.add_argument("--subsample", type=int, default=None,
                        help="evaluate only this many evenly spaced windows")
    p_eval.add_argument("--pool-windows", action="store_true",
                        help="pool all windows into one two-sample problem")
    p_eval.add_argument("--sweep", default=None,
                        help="comma-separated censoring quantiles to sweep")
    p_eval.add_argument("--dyadic-order", type=int, default=None,
                        help="override the kernel refinement order")
    p_eval.add_argument("--no-plot", action="store_true",
                        help="skip image outputs")

    p_synth = sub.add_parser("synth", help="write a seeded synthetic dataset")
    p_synth.add_argument("--experiment", required=True, choices=SYNTH_EXPERIMENTS)
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--horizon", type=int, default=12)
    p_synth.add_argument("--variates", type=int, default=2,
                         help="dependency experiment only")
    p_synth.add_argument("--windows", type=int, default=8)
    p_synth.add_argument("--samples", type=int, default=16,
                         help="forecast samples per window")
    p_synth.add_argument("--train-windows", type=int, default=64)
    p_synth.add_argument("--scenario", default="wrong_mean", choices=POWER_SCENARIOS,
                         help="power experiment only")
    p_synth.add_argument("--d", type=int, default=8, help="power experiment only")
    p_synth.add_argument("--m", type=int, default=64, help="power experiment only")

    p_power = sub.add_parser("power", help="permutation-test power grid")
    p_power.add_argument("--scenario", required=True, choices=POWER_SCENARIOS)
    p_power.add_argument("--dims", required=True, help="comma-separated path lengths")
    p_power.add_argument("--sizes", required=True, help="comma-separated sample sizes")
    p_power.add_argument("--reps", type=int, required=True)
    p_power.add_argument("--metric", default="sig", choices=METRICS)
    p_power.add_argument("--alpha", type=float, default=0.05)
    p_power.add_argument("--permutations", type=int, default=200)
    p_power.add_argument("--seed", type=int, default=0)
    p_power.add_argument("--quantile", type=float, default=0.95,
                         help="censoring quantile for the csig metric")
    p_power.add_argument("--dyadic-order", type=int, default=1)
    p_power.add_argument("--out", default=None, help="directory for CSV output")
    p_power.add_argument("--heatmap", action="store_true",
                         help="also render a heatmap image (needs --out)")
    return parser


def _cmd_eval(args) -> int:
    manifest = load_manifest(args.manifest)
    config = manifest.config
    if args.quantile is not None:
        config = replace(config, censor_quantile=args.quantile)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.subsample is not None:
        config = replace(config, subsample=args.subsample)
    if args.pool_windows:
        config = replace(config, pool_windows=True)
    if args.sweep is not None:
        config = replace(config, sweep_quantiles=tuple(_comma_floats(args.sweep)))
    if args.dyadic_order is not None:
        config = replace(config, kernel=replace(config.kernel,
                                                dyadic_order=args.dyadic_order))
    manifest = replace(manifest, config=config)

    report = run_eval(manifest)
    files = emit_report(report, args.out, plot=not args.no_plot)
    print(f"dataset {report.dataset}: {len(report.models)} models, "
          f"{len(report.window_ids)} windows")
    for metric in report.metrics:
        ranked = sorted(report.models, key=lambda m: report.summary[m][metric])
        line = ", ".join(
            f"{m}={report.summary[m][metric]:.6g} ({report.outcomes[metric][m]})"
            for m in ranked
        )
        print(f"  {metric}: {line}")
    for path in files:
        print(f"wrote {path}")
    return 0


def _cmd_synth(args) -> int:
    files = emit_synthetic(
        args.experiment, args.out, seed=args.seed, horizon=args.horizon,
        variates=args.variates, windows=args.windows, samples=args.samples,
        train_windows=args.train_windows, scenario=args.scenario,
        d=args.d, m=args.m,
    )
    for path in files:
        print(f"wrote {path}")
    return 0


def _grid_frame(grid: PowerGrid, metric: str, alpha: float):
    df = grid.to_frame()
    df.insert(1, "metric", metric)
    df.insert(2, "alpha", alpha)
    return df


def _cmd_power(args) -> int:
    grid = power_grid(
        args.scenario, _comma_ints(args.dims), _comma_ints(args.sizes), args.reps,
        metric=args.metric, alpha=args.alpha, seed=args.seed, B=args.permutations,
        cfg=KernelConfig(dyadic_order=args.dyadic_order),
        censor_quantile=args.quantile,
    )
    df = _grid_frame(grid, args.metric, args.alpha)
    print(df.to_string(index=False))
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"power_{args.scenario}.csv"
        df.to_csv(csv_path, index=False)
        print(f"wrote {csv_path}")
        if args.heatmap:
            png_path = out / f"power_{args.scenario}.png"
            render_heatmap(grid, png_path)
            print(f"wrote {png_path}")
    elif args.heatmap:
        raise ValidationError("--heatmap needs --out")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {"eval": _cmd_eval, "synth": _cmd_synth, "power": _cmd_power}
    try:
        return handlers[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
