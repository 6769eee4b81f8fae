"""Shared fixtures: small deterministic path sets reused across test modules."""
import numpy as np
import pytest

from sigscore.paths import Trajectory, augment_all, fit_norm_stats
from sigscore.synthetic import GpSpec, sample_gp


def smooth_paths(count: int, rows: int, channels: int, scale: float = 0.1,
                 seed: int = 0) -> list[np.ndarray]:
    """Random smooth paths: cumulative sums of small increments, zero start."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        incs = scale * rng.standard_normal((rows - 1, channels))
        path = np.vstack([np.zeros(channels), np.cumsum(incs, axis=0)])
        out.append(path)
    return out


def random_trajectories(count: int, horizon: int, variates: int,
                        seed: int = 0) -> list[Trajectory]:
    rng = np.random.default_rng(seed)
    times = np.linspace(0.0, 1.0, horizon)
    return [Trajectory(rng.standard_normal((horizon, variates)), times)
            for _ in range(count)]


@pytest.fixture(scope="session")
def gp_train_windows() -> list[Trajectory]:
    """64 training windows from one smooth bivariate process."""
    return sample_gp(GpSpec(horizon=10, variates=2), 64, seed_or_rng=11)


@pytest.fixture(scope="session")
def gp_eval_paths(gp_train_windows) -> list[np.ndarray]:
    """16 augmented same-law paths, normalized by the training stats."""
    spec = GpSpec(horizon=10, variates=2)
    stats = fit_norm_stats(gp_train_windows)
    return augment_all(sample_gp(spec, 16, seed_or_rng=12), stats)
