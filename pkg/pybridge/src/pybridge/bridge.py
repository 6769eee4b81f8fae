"""Array-in, array-out bindings over the sigscore scoring package.

Forecasting pipelines hand over numeric buffers; conversion to float64 is
zero-copy whenever the buffer already matches, a copy otherwise. Every
function delegates to the published scoring API and returns plain
containers, so results are bit-identical to what a manifest evaluation of
the same numbers produces.
"""
from __future__ import annotations

import json

import numpy as np
from sigscore import (
    DECILE_LEVELS,
    CensorModel,
    ForecastInstance,
    GpSpec,
    KernelConfig,
    Trajectory,
    ValidationError,
    augment,
    augment_all,
    csig_mmd,
    fit_censor_model,
    gram,
    make_dependency_set,
    make_focus_set,
    make_power_pair,
    mmd2_biased,
    sample_gp,
    score_instance,
)
from sigscore.synthetic import DEPENDENCY_LENGTHSCALE

METRICS = ("ql", "crps", "es", "vs", "sig", "csig")


def _block(values, name: str, ndim: int) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != ndim:
        raise ValidationError(
            f"{name} must be {ndim}-dimensional, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def _trajectories(values, times, name: str) -> list[Trajectory]:
    block = _block(values, name, 3)
    if times is None:
        times = np.arange(block.shape[1], dtype=np.float64)
    return [Trajectory(window, times) for window in block]


def _load_model(model) -> CensorModel:
    if isinstance(model, str):
        model = json.loads(model)
    if not isinstance(model, dict):
        raise ValidationError("model must be a serialized censor document")
    return CensorModel.from_json(model)


def score_window(truth, samples, times=None, *, train=None, train_times=None,
                 model=None, quantile: float = 0.95, sig_depth: int = 4,
                 seed: int = 0, static_kernel: str = "rbf",
                 bandwidth: float | None = None, dyadic_order: int = 2,
                 ql_levels=DECILE_LEVELS, vs_p: float = 0.5) -> dict:
    """Score one forecast window against its observed path.

    truth is (T, D) and samples (S, T, D). The censor comes either from
    `model` (a document produced by fit_censor) or is fitted on `train`
    (N, T, D) with the given quantile, depth and seed; with `train` the
    kernel bandwidth also resolves from the training windows, exactly as a
    manifest evaluation resolves it. Returns {metric: value} with vs
    present only for D >= 2; lower is better throughout.
    """
    inst = ForecastInstance(np.asarray(truth, dtype=np.float64),
                            np.asarray(samples, dtype=np.float64), times)
    if (train is None) == (model is None):
        raise ValidationError("pass exactly one of train and model")

    if train is not None:
        train_trajs = _trajectories(
            train, inst.times if train_times is None else train_times, "train"
        )
        censor = CensorModel(quantile=quantile, sig_depth=sig_depth,
                             seed=seed).fit(train_trajs)
    else:
        censor = _load_model(model)

    sample_paths = augment_all(
        [Trajectory(s, inst.times) for s in inst.samples], censor.norm_
    )
    truth_path = augment(Trajectory(inst.truth, inst.times), censor.norm_)
    cfg = KernelConfig(static_kernel=static_kernel, bandwidth=bandwidth,
                       dyadic_order=dyadic_order)
    if train is not None:
        cfg = cfg.resolved(augment_all(train_trajs, censor.norm_))
    else:
        cfg = cfg.resolved([truth_path])

    out = {key: float(value)
           for key, value in score_instance(inst, tuple(ql_levels),
                                            float(vs_p)).items()}
    gxx = gram(sample_paths, cfg=cfg, include_pivot=True)
    gyy = gram([truth_path], cfg=cfg, include_pivot=True)
    gxy = gram(sample_paths, [truth_path], cfg=cfg, include_pivot=True)
    out["sig"] = float(mmd2_biased(gxx.matrix, gyy.matrix, gxy.matrix))
    out["csig"] = float(csig_mmd(sample_paths, [truth_path], censor,
                                 grams=(gxx, gyy, gxy)).value)
    return out


def fit_censor(train, quantile: float = 0.95, beta: float = 10.0,
               times=None, **options) -> str:
    """Fit the tail censor on training windows (N, T, D).

    Returns the model as its serialized JSON document; feed it back through
    score_window's `model` argument or persist it next to evaluation
    outputs. Extra keyword options (sig_depth, pca_variance, seed, ...)
    pass straight through to the underlying estimator.
    """
    trajs = _trajectories(train, times, "train")
    fitted = fit_censor_model(trajs, quantile=quantile, beta=beta, **options)
    return json.dumps(fitted.to_json(), sort_keys=True)


def _stack(trajs) -> np.ndarray:
    return np.stack([t.values for t in trajs])


def synth_gp(count: int, horizon: int, variates: int = 1,
             lengthscale: float = 0.25, seed=0):
    """Stationary Gaussian process windows: (times (T,), values (count, T, D))."""
    spec = GpSpec(horizon, variates, lengthscale=lengthscale)
    return np.array(spec.times), _stack(sample_gp(spec, count, seed))


def synth_dependency(count: int, horizon: int = 24, variates: int = 4,
                     seed: int = 0, lengthscale: float = DEPENDENCY_LENGTHSCALE):
    """The four dependency forecast sets as (times, {name: (count, T, D)})."""
    spec = GpSpec(horizon, variates, lengthscale=lengthscale)
    sets = make_dependency_set(spec, count, seed)
    return np.array(spec.times), {name: _stack(sets[name]) for name in sorted(sets)}


def synth_focus(count: int, horizon: int = 24, seed: int = 0):
    """The four tail-focus forecast sets as (times, {name: (count, T, 1)})."""
    sets = make_focus_set(horizon, count, seed)
    times = sets["F1"][0].times
    return np.array(times), {name: _stack(sets[name]) for name in sorted(sets)}


def synth_power(scenario: str, d: int, m: int, seed: int = 0, **params):
    """One power-scenario pair as (times, truth (m, d, 1), forecast (m, d, 1))."""
    truth, forecast = make_power_pair(scenario, d, m, seed, **params)
    return np.array(truth[0].times), _stack(truth), _stack(forecast)
