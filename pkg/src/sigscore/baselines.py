"""Classical per-window forecast scores: quantile loss, CRPS, energy and
variogram scores.

All four reduce per-time-step partial scores with a sorted summation, so a
joint relabeling of the time axis of truth and samples leaves every score
bit-identical, not merely close.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import as_float_array
from .exceptions import ValidationError

DECILE_LEVELS = tuple(np.round(np.arange(0.1, 1.0, 0.1), 1))


@dataclass(frozen=True)
class ForecastInstance:
    """One evaluation window: truth (T, D), forecast samples (S, T, D), times (T,)."""

    truth: np.ndarray
    samples: np.ndarray
    times: np.ndarray = field(default=None)

    def __post_init__(self):
        truth = as_float_array(self.truth, "truth", ndim=2)
        samples = as_float_array(self.samples, "samples", ndim=3)
        if samples.shape[0] < 2:
            raise ValidationError("unbiased estimation needs >= 2 samples")
        if samples.shape[1:] != truth.shape:
            raise ValidationError(
                f"samples shape {samples.shape} does not match truth {truth.shape}"
            )
        times = self.times
        if times is None:
            times = np.arange(truth.shape[0], dtype=np.float64)
        times = as_float_array(times, "times", ndim=1)
        if times.shape[0] != truth.shape[0]:
            raise ValidationError("times length does not match the horizon")
        if times.shape[0] > 1 and not np.all(np.diff(times) > 0):
            raise ValidationError("times not strictly increasing")
        object.__setattr__(self, "truth", truth)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "times", times)

    @property
    def horizon(self) -> int:
        return self.truth.shape[0]

    @property
    def variates(self) -> int:
        return self.truth.shape[1]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]


def _mean_sorted(values: np.ndarray) -> float:
    # order-canonical mean: invariant to any permutation of the entries
    flat = np.sort(values, axis=None)
    return float(flat.sum() / flat.size)


def quantile_loss(inst: ForecastInstance, levels=DECILE_LEVELS) -> float:
    """Mean pinball loss of the empirical forecast quantiles at the given levels.

    Quantiles use linear interpolation between order statistics; the result
    averages over levels, steps and variates.
    """
    levels = np.asarray(levels, dtype=np.float64)
    if levels.ndim != 1 or levels.size == 0 or np.any((levels <= 0) | (levels >= 1)):
        raise ValidationError("levels must be a non-empty vector inside (0, 1)")
    q = np.quantile(inst.samples, levels, axis=0)  # (Q, T, D)
    err = inst.truth[None, :, :] - q
    pinball = np.where(err >= 0, levels[:, None, None] * err,
                       (levels[:, None, None] - 1.0) * err)
    return _mean_sorted(pinball.mean(axis=(0, 2)))


def crps(inst: ForecastInstance) -> float:
    """Sample CRPS averaged over steps and variates.

    Per coordinate: mean |x_i - y| - (1 / 2 S^2) sum_{ij} |x_i - x_j|; the
    pairwise term uses the sorted-sample identity.
    """
    samples = inst.samples
    s = samples.shape[0]
    term1 = np.mean(np.abs(samples - inst.truth[None, :, :]), axis=0)  # (T, D)
    srt = np.sort(samples, axis=0)
    coeff = 2.0 * np.arange(1, s + 1) - s - 1.0  # sum_ij |xi - xj| = 2 sum_k coeff_k x_(k)
    pair_sum = 2.0 * np.tensordot(coeff, srt, axes=(0, 0))  # (T, D)
    per_step = (term1 - pair_sum / (2.0 * s * s)).mean(axis=1)
    return _mean_sorted(per_step)


def _pairwise_step_norms(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # a (Sa, T, D), b (Sb, T, D) -> norms (Sa, Sb) of flattened differences,
    # with the step axis reduced in sorted order for exact permutation invariance
    diff2 = np.sum((a[:, None, :, :] - b[None, :, :, :]) ** 2, axis=3)  # (Sa, Sb, T)
    diff2 = np.sort(diff2, axis=2)
    return np.sqrt(np.sum(diff2, axis=2))


def energy_score(inst: ForecastInstance) -> float:
    """Energy score on trajectories flattened over steps and variates."""
    samples = inst.samples
    s = samples.shape[0]
    to_truth = _pairwise_step_norms(samples, inst.truth[None, :, :])[:, 0]
    between = _pairwise_step_norms(samples, samples)
    term1 = float(np.sort(to_truth).sum() / s)
    term2 = float(np.sort(between, axis=None).sum() / (2.0 * s * s))
    return term1 - term2


def variogram_score(inst: ForecastInstance, p: float = 0.5,
                    weights: np.ndarray | None = None) -> float:
    """Variogram score of order p per time step, averaged over steps.

    Compares |y_i - y_j|^p across variate pairs with the forecast mean of
    the same quantity; uniform weights by default.
    """
    d = inst.variates
    if d < 2:
        raise ValidationError("variogram needs >= 2 variates")
    if p <= 0:
        raise ValidationError(f"variogram order must be positive, got {p}")
    if weights is None:
        weights = np.ones((d, d))
    else:
        weights = as_float_array(weights, "weights", ndim=2)
        if weights.shape != (d, d):
            raise ValidationError(f"weights must be ({d}, {d})")
    truth_v = np.abs(inst.truth[:, :, None] - inst.truth[:, None, :]) ** p  # (T, D, D)
    samp_v = np.mean(
        np.abs(inst.samples[:, :, :, None] - inst.samples[:, :, None, :]) ** p, axis=0
    )  # (T, D, D)
    gap2 = (truth_v - samp_v) ** 2
    iu = np.triu_indices(d, k=1)
    per_step = (gap2[:, iu[0], iu[1]] * weights[iu]).sum(axis=1)
    return _mean_sorted(per_step)


def score_instance(inst: ForecastInstance, ql_levels=DECILE_LEVELS,
                   vs_p: float = 0.5) -> dict[str, float]:
    """All applicable classical scores for one window."""
    out = {
        "ql": quantile_loss(inst, ql_levels),
        "crps": crps(inst),
        "es": energy_score(inst),
    }
    if inst.variates >= 2:
        out["vs"] = variogram_score(inst, vs_p)
    return out
