"""Permutation two-sample tests and power grids over synthetic scenarios.

The pooled kernel matrix is computed once per test; every permutation only
re-slices it, so the permuted statistics are bit-identical to what a full
re-evaluation under the same config would produce.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_path_list
from .censoring import CensorModel, censored_kernel_block
from .exceptions import ValidationError
from .mmd import _flatten_paths, _median_of_rows, mmd2_unbiased, rbf_gram
from .paths import augment_all, fit_norm_stats
from .sigkernel import KernelConfig, gram
from .synthetic import ScenarioSpec, make_power_pair, rng_for

METRICS = ("sig", "csig", "rbf")
DEFAULT_PERMUTATIONS = 200


@dataclass(frozen=True)
class TestResult:
    """Outcome of one permutation test; the three decision fields agree:
    reject <=> statistic > threshold <=> p_value < alpha."""

    statistic: float
    threshold: float
    p_value: float
    reject: bool
    permutations: int


@dataclass(frozen=True)
class PowerGrid:
    """Rejection frequencies over a (dimension x sample size) grid."""

    dims: tuple[int, ...]
    sizes: tuple[int, ...]
    power: np.ndarray
    scenario: ScenarioSpec
    reps: int

    def to_frame(self):
        """Long-format table with one row per grid cell."""
        import pandas as pd

        rows = [
            {"scenario": self.scenario.kind, "d": d, "m": m, "reps": self.reps,
             "power": float(self.power[i, j])}
            for i, d in enumerate(self.dims)
            for j, m in enumerate(self.sizes)
        ]
        return pd.DataFrame(rows, columns=["scenario", "d", "m", "reps", "power"])


def _pooled_kernel_matrix(pooled: list[np.ndarray], metric: str,
                          cfg: KernelConfig, model: CensorModel | None) -> np.ndarray:
    if metric == "rbf":
        rows = _flatten_paths(pooled, "pooled")
        bw = cfg.bandwidth if cfg.bandwidth is not None else _median_of_rows(rows)
        return rbf_gram(rows, rows, bw)
    cfg = cfg.resolved(pooled)
    if metric == "sig":
        return gram(pooled, cfg=cfg).matrix
    g = gram(pooled, cfg=cfg, include_pivot=True)
    w = model.weights(pooled)
    return censored_kernel_block(g.matrix, w, w, g.x_pivot, g.x_pivot, g.pivot_value)


def _split_stat(pooled_matrix: np.ndarray, a_idx: np.ndarray, b_idx: np.ndarray) -> float:
    """Unbiased squared-MMD statistic of one labeling, sliced from the pooled matrix."""
    kxx = pooled_matrix[np.ix_(a_idx, a_idx)]
    kyy = pooled_matrix[np.ix_(b_idx, b_idx)]
    kxy = pooled_matrix[np.ix_(a_idx, b_idx)]
    return mmd2_unbiased(kxx, kyy, kxy)


def permutation_test(X, Y, metric: str = "sig", B: int = DEFAULT_PERMUTATIONS,
                     alpha: float = 0.05, model: CensorModel | None = None,
                     cfg: KernelConfig | None = None, seed: int = 0) -> TestResult:
    """Two-sample permutation test on augmented paths.

    The observed statistic is the unbiased squared MMD under the chosen
    metric. B label permutations re-slice one pooled kernel matrix; the
    p-value is (1 + #{permuted >= observed}) / (B + 1) and the threshold is
    the matching upper order statistic, so the decision triple is consistent
    by construction.
    """
    metric = str(metric)
    if metric not in METRICS:
        raise ValidationError(f"metric must be one of {METRICS}, got {metric!r}")
    if metric == "csig":
        if model is None:
            raise ValidationError("metric csig requires a fitted censor model")
        model._require_fitted()
    B = int(B)
    if B < 100:
        raise ValidationError(f"B must be at least 100, got {B}")
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")
    xs = check_path_list(X, "X")
    ys = check_path_list(Y, "Y")
    if xs[0].shape[1] != ys[0].shape[1]:
        raise ValidationError("X and Y must share the channel count")
    m, n = len(xs), len(ys)
    if m < 2 or n < 2:
        raise ValidationError("unbiased estimator needs >= 2 samples")

    if cfg is None:
        cfg = KernelConfig()
    pooled = xs + ys
    K = _pooled_kernel_matrix(pooled, metric, cfg, model)

    idx = np.arange(m + n)
    observed = _split_stat(K, idx[:m], idx[m:])
    rng = np.random.default_rng(seed)
    permuted = np.empty(B)
    for b in range(B):
        p = rng.permutation(m + n)
        permuted[b] = _split_stat(K, p[:m], p[m:])

    exceed = int(np.sum(permuted >= observed))
    p_value = (1 + exceed) / (B + 1)
    # largest rank k with (1 + k) / (B + 1) < alpha; reject iff observed
    # beats the k-th largest permuted value
    rank = math.ceil(alpha * (B + 1) - 1) - 1
    if rank < 0:
        threshold = math.inf
    else:
        threshold = float(np.sort(permuted)[B - 1 - rank])
    reject = observed > threshold
    return TestResult(float(observed), threshold, p_value, bool(reject), B)


def _trial_seeds(seed: int, kind: str, d: int, m: int, rep: int) -> tuple[int, int, int]:
    draw = rng_for(seed, "power_grid", kind, d, m, rep).integers(0, 2 ** 63, size=3)
    return int(draw[0]), int(draw[1]), int(draw[2])


def power_grid(scenario: ScenarioSpec, dims, sizes, reps: int,
               metric: str = "sig", alpha: float = 0.05, seed: int = 0,
               B: int = DEFAULT_PERMUTATIONS, cfg: KernelConfig | None = None,
               censor_quantile: float = 0.95, censor_depth: int = 3) -> PowerGrid:
    """Rejection frequency of the permutation test per (d, m) cell.

    Each cell/replication owns an independent counter-based RNG stream, so
    the grid is reproducible cell by cell in any execution order. With the
    csig metric a censor model is fitted per trial on an independent
    training draw from the ground-truth law, keeping the pooled sample
    exchangeable under the null.
    """
    if isinstance(scenario, str):
        scenario = ScenarioSpec(scenario)
    reps = int(reps)
    if reps < 20:
        raise ValidationError(f"reps must be at least 20, got {reps}")
    dims = tuple(int(d) for d in dims)
    sizes = tuple(int(m) for m in sizes)
    if not dims or not sizes:
        raise ValidationError("dims and sizes must be non-empty")
    if cfg is None:
        cfg = KernelConfig()

    power = np.zeros((len(dims), len(sizes)))
    for i, d in enumerate(dims):
        for j, m in enumerate(sizes):
            rejections = 0
            for rep in range(reps):
                data_seed, perm_seed, train_seed = _trial_seeds(
                    seed, scenario.kind, d, m, rep
                )
                truth, forecast = make_power_pair(scenario, d, m, data_seed)
                if metric == "csig":
                    train, _ = make_power_pair(scenario, d, m, train_seed)
                    model = CensorModel(quantile=censor_quantile,
                                        sig_depth=censor_depth).fit(train)
                    X = augment_all(truth, model.norm_)
                    Y = augment_all(forecast, model.norm_)
                else:
                    model = None
                    stats = fit_norm_stats(truth + forecast)
                    X = augment_all(truth, stats)
                    Y = augment_all(forecast, stats)
                result = permutation_test(X, Y, metric=metric, B=B, alpha=alpha,
                                          model=model, cfg=cfg, seed=perm_seed)
                rejections += int(result.reject)
            power[i, j] = rejections / reps
    return PowerGrid(dims, sizes, power, scenario, reps)


def render_heatmap(grid: PowerGrid, out_path) -> None:
    """Write the power grid as a heatmap image (one panel, annotated cells)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(1.2 + 0.9 * len(grid.sizes),
                                    1.0 + 0.7 * len(grid.dims)))
    im = ax.imshow(grid.power, vmin=0.0, vmax=1.0, cmap="viridis", aspect="auto")
    ax.set_xticks(range(len(grid.sizes)), [str(m) for m in grid.sizes])
    ax.set_yticks(range(len(grid.dims)), [str(d) for d in grid.dims])
    ax.set_xlabel("sample size m")
    ax.set_ylabel("dimension d")
    ax.set_title(f"{grid.scenario.kind} ({grid.reps} reps)")
    for i in range(len(grid.dims)):
        for j in range(len(grid.sizes)):
            v = grid.power[i, j]
            ax.text(j, i, f"{v:.2f}", ha="center", va="center",
                    color="white" if v < 0.6 else "black", fontsize=8)
    fig.colorbar(im, ax=ax, label="power")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
