"""Trajectory containers, per-variate normalization and path augmentation.

A trajectory is the raw object produced by a forecaster or a data loader:
values on a strictly increasing time grid. Before any signature computation
it is augmented into a path matrix with a trailing time channel, a zero
base point and a zero end point, which pins translation and gives the
signature a well-defined starting reference.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import as_float_array
from .exceptions import ValidationError

SCALE_FLOOR = 1e-8


@dataclass(frozen=True)
class Trajectory:
    """Observed values, shape (T, D), on a strictly increasing time grid (T,)."""

    values: np.ndarray
    times: np.ndarray

    def __post_init__(self):
        values = as_float_array(self.values, "values", ndim=2)
        times = as_float_array(self.times, "times", ndim=1)
        if values.shape[0] != times.shape[0]:
            raise ValidationError(
                f"values has {values.shape[0]} rows but times has {times.shape[0]}"
            )
        if values.shape[0] < 1:
            raise ValidationError("trajectory needs at least one observation")
        if times.shape[0] > 1 and not np.all(np.diff(times) > 0):
            raise ValidationError("times not strictly increasing")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "times", times)

    @property
    def horizon(self) -> int:
        return self.values.shape[0]

    @property
    def variates(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class NormStats:
    """Per-variate location and scale, fitted on training data only."""

    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        mean = as_float_array(self.mean, "mean", ndim=1)
        scale = as_float_array(self.scale, "scale", ndim=1)
        if mean.shape != scale.shape:
            raise ValidationError("mean and scale must have matching shapes")
        if np.any(scale <= 0):
            raise ValidationError("scale entries must be positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "scale", scale)

    @classmethod
    def identity(cls, variates: int) -> "NormStats":
        return cls(np.zeros(variates), np.ones(variates))

    def apply(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean) / self.scale

    def invert(self, normalized: np.ndarray) -> np.ndarray:
        return normalized * self.scale + self.mean


def fit_norm_stats(trajectories) -> NormStats:
    """Pool all rows of the training trajectories and fit mean/std per variate.

    Population std (ddof=0); any scale below 1e-8 is replaced by 1.0 so
    constant variates pass through unscaled.
    """
    trajectories = list(trajectories)
    if not trajectories:
        raise ValidationError("no training data")
    pooled = np.vstack([t.values for t in trajectories])
    mean = pooled.mean(axis=0)
    scale = pooled.std(axis=0)
    scale = np.where(scale < SCALE_FLOOR, 1.0, scale)
    return NormStats(mean, scale)


def augment(traj: Trajectory, stats: NormStats | None = None,
            time_scale: float | None = None) -> np.ndarray:
    """Build the (T+2) x (D+1) augmented path matrix for a trajectory.

    The variates are normalized by `stats` (identity if None) and the time
    grid is shifted to start at 0 and divided by `time_scale` (the duration
    by default, or 1.0 for single-point trajectories). A zero row at time 0
    is prepended and a zero-variate row one mean time step past the end is
    appended; the time channel is last.
    """
    horizon, variates = traj.values.shape
    if stats is None:
        stats = NormStats.identity(variates)
    if stats.mean.shape[0] != variates:
        raise ValidationError(
            f"stats cover {stats.mean.shape[0]} variates but trajectory has {variates}"
        )
    if time_scale is None:
        duration = float(traj.times[-1] - traj.times[0])
        time_scale = duration if duration > 0 else 1.0
    if not np.isfinite(time_scale) or time_scale <= 0:
        raise ValidationError(f"time_scale must be positive, got {time_scale}")
    rescaled = (traj.times - traj.times[0]) / time_scale
    step = (rescaled[-1] - rescaled[0]) / (horizon - 1) if horizon > 1 else 1.0

    out = np.zeros((horizon + 2, variates + 1))
    out[1:-1, :variates] = stats.apply(traj.values)
    out[1:-1, variates] = rescaled
    out[-1, variates] = rescaled[-1] + step
    return out


def augment_all(trajectories, stats: NormStats | None = None,
                time_scale: float | None = None) -> list[np.ndarray]:
    return [augment(t, stats, time_scale) for t in trajectories]


def split_augmented(path: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse layout of augment: normalized core values (T, D), time channel (T+2,)."""
    path = as_float_array(path, "path", ndim=2)
    if path.shape[0] < 3 or path.shape[1] < 2:
        raise ValidationError("not an augmented path")
    return path[1:-1, :-1], path[:, -1]


def zero_pivot(horizon: int, variates: int) -> np.ndarray:
    """The constant zero path sized like an augmented trajectory.

    All channels, including time, are identically zero, so its signature is
    trivial and its signature kernel with any path equals 1.
    """
    if horizon < 1 or variates < 1:
        raise ValidationError("horizon and variates must be at least 1")
    return np.zeros((horizon + 2, variates + 1))
