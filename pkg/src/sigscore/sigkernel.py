"""Signature kernel via the Goursat PDE on the static-kernel increment grid.

Each kernel evaluation solves u_st = A(s, t) u on the grid of cross
increments of a static kernel (RBF or linear) over two paths, with unit
boundary data; the far corner is the signature kernel value. Dyadic
refinement subdivides every grid cell 2^order times per axis and scales
the forcing by 4^-order, which is the cross difference of the bilinear
interpolant. The batched solver is JIT compiled; every output entry is
written exactly once, so results do not depend on the thread count.
"""
from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, replace

import numpy as np
from numba import njit, prange, set_num_threads
from numba import config as _numba_config

from ._validation import (
    as_float_array,
    check_path,
    check_path_list,
    stack_if_uniform,
)
from .exceptions import NumericalError, ValidationError

STATIC_KERNELS = ("rbf", "linear")
FORCING_WARN_LEVEL = 10.0
MEDIAN_HEURISTIC_CAP = 2000


@dataclass(frozen=True)
class KernelConfig:
    """Static kernel choice, its bandwidth, and the dyadic refinement order."""

    static_kernel: str = "rbf"
    bandwidth: float | None = None
    dyadic_order: int = 2

    def __post_init__(self):
        if self.static_kernel not in STATIC_KERNELS:
            raise ValidationError(
                f"static_kernel must be one of {STATIC_KERNELS}, got {self.static_kernel!r}"
            )
        if self.bandwidth is not None:
            bw = float(self.bandwidth)
            if not np.isfinite(bw) or bw <= 0:
                raise ValidationError(f"bandwidth must be positive, got {self.bandwidth}")
            object.__setattr__(self, "bandwidth", bw)
        order = int(self.dyadic_order)
        if order < 0:
            raise ValidationError(f"dyadic_order must be >= 0, got {self.dyadic_order}")
        object.__setattr__(self, "dyadic_order", order)

    def resolved(self, reference_paths) -> "KernelConfig":
        """Fill in the bandwidth by the median heuristic when unset."""
        if self.static_kernel == "rbf" and self.bandwidth is None:
            return replace(self, bandwidth=median_heuristic(reference_paths))
        return self

    @property
    def gamma(self) -> float:
        # rbf(a, b) = exp(-|a - b|^2 * gamma) with gamma = 1 / (2 bandwidth^2)
        if self.static_kernel != "rbf":
            return 0.0
        if self.bandwidth is None:
            raise ValidationError("rbf bandwidth is unset; call resolved() or set it")
        return 1.0 / (2.0 * self.bandwidth * self.bandwidth)


@dataclass(frozen=True)
class Gram:
    """A kernel matrix, optionally with the zero-path pivot columns attached."""

    matrix: np.ndarray
    symmetric: bool
    config: KernelConfig
    x_pivot: np.ndarray | None = None
    y_pivot: np.ndarray | None = None
    pivot_value: float | None = None


def median_heuristic(paths) -> float:
    """Median pairwise euclidean distance over all rows of all paths.

    With more than 2000 pooled rows an evenly spaced deterministic subsample
    is used. Falls back to 1.0 when all rows coincide.
    """
    paths = check_path_list(paths, "paths")
    pooled = np.vstack(paths)
    if pooled.shape[0] > MEDIAN_HEURISTIC_CAP:
        idx = np.linspace(0, pooled.shape[0] - 1, MEDIAN_HEURISTIC_CAP).astype(np.int64)
        pooled = pooled[idx]
    from scipy.spatial.distance import pdist

    dists = pdist(pooled)
    if dists.size == 0:
        return 1.0
    med = float(np.median(dists))
    return med if med > 0 else 1.0


def _threads_from_env() -> None:
    raw = os.environ.get("SIGSCORE_THREADS")
    if not raw:
        return
    try:
        requested = int(raw)
    except ValueError:
        raise ValidationError(f"SIGSCORE_THREADS must be an integer, got {raw!r}")
    limit = max(1, min(requested, _numba_config.NUMBA_NUM_THREADS))
    set_num_threads(limit)


@njit(cache=True, fastmath=False)
def _pair_solve(x, y, order, use_rbf, gamma):
    # Returns (kernel value, max |forcing| before refinement scaling).
    lx = x.shape[0]
    ly = y.shape[0]
    c = x.shape[1]
    nx = lx - 1
    ny = ly - 1
    static = np.empty((lx, ly))
    for i in range(lx):
        for j in range(ly):
            acc = 0.0
            if use_rbf:
                for k in range(c):
                    d = x[i, k] - y[j, k]
                    acc += d * d
                static[i, j] = np.exp(-acc * gamma)
            else:
                for k in range(c):
                    acc += x[i, k] * y[j, k]
                static[i, j] = acc
    forcing = np.empty((nx, ny))
    max_abs = 0.0
    for i in range(nx):
        for j in range(ny):
            a = static[i + 1, j + 1] - static[i + 1, j] - static[i, j + 1] + static[i, j]
            forcing[i, j] = a
            if abs(a) > max_abs:
                max_abs = abs(a)
    factor = 1 << order
    scale = 1.0 / (factor * factor)
    rows = nx * factor
    cols = ny * factor
    prev = np.ones(cols + 1)
    cur = np.empty(cols + 1)
    for i in range(rows):
        cur[0] = 1.0
        base = forcing[i >> order]
        for j in range(cols):
            a = base[j >> order] * scale
            p_mid = 1.0 + 0.5 * a + a * a / 12.0
            p_old = 1.0 - a * a / 12.0
            cur[j + 1] = (cur[j] + prev[j + 1]) * p_mid - prev[j] * p_old
        tmp = prev
        prev = cur
        cur = tmp
    return prev[cols], max_abs


@njit(cache=True, parallel=True, fastmath=False)
def _gram_cross(xs, ys, order, use_rbf, gamma):
    n = xs.shape[0]
    m = ys.shape[0]
    out = np.empty((n, m))
    max_abs = np.zeros(n)
    for i in prange(n):
        local = 0.0
        for j in range(m):
            v, a = _pair_solve(xs[i], ys[j], order, use_rbf, gamma)
            out[i, j] = v
            if a > local:
                local = a
        max_abs[i] = local
    return out, max_abs


@njit(cache=True, parallel=True, fastmath=False)
def _gram_sym(xs, order, use_rbf, gamma):
    n = xs.shape[0]
    out = np.empty((n, n))
    max_abs = np.zeros(n)
    for i in prange(n):
        local = 0.0
        for j in range(i, n):
            v, a = _pair_solve(xs[i], xs[j], order, use_rbf, gamma)
            out[i, j] = v
            out[j, i] = v
            if a > local:
                local = a
        max_abs[i] = local
    return out, max_abs


def _warn_if_stiff(max_abs: float) -> None:
    if max_abs > FORCING_WARN_LEVEL:
        warnings.warn(
            f"static-kernel increments reach {max_abs:.3g} (> {FORCING_WARN_LEVEL:g}); "
            "normalize the paths or widen the rbf bandwidth",
            RuntimeWarning,
            stacklevel=3,
        )


def _check_finite(values: np.ndarray) -> None:
    if not np.all(np.isfinite(values)):
        raise NumericalError("PDE solve diverged")


def static_increment_grid(x, y, cfg: KernelConfig) -> np.ndarray:
    """Cross-increment forcing grid of the static kernel, dyadically refined.

    Entry (i, j) of the coarse grid is the second-order cross difference of
    the static kernel over path increments; each cell is then repeated
    2^order times per axis and scaled by 4^-order.
    """
    x = check_path(x, "x")
    y = check_path(y, "y")
    if x.shape[1] != y.shape[1]:
        raise ValidationError("paths must share the channel count")
    if cfg.static_kernel == "rbf":
        diff = x[:, None, :] - y[None, :, :]
        static = np.exp(-np.sum(diff * diff, axis=2) * cfg.gamma)
    else:
        static = x @ y.T
    coarse = static[1:, 1:] - static[1:, :-1] - static[:-1, 1:] + static[:-1, :-1]
    _warn_if_stiff(float(np.max(np.abs(coarse))) if coarse.size else 0.0)
    factor = 1 << cfg.dyadic_order
    fine = np.repeat(np.repeat(coarse, factor, axis=0), factor, axis=1)
    return fine / (factor * factor)


def solve_goursat(grid) -> float:
    """Solve u_st = A u with unit boundary on an already refined grid.

    Second-order scheme; the returned value is the far corner of the grid.
    """
    grid = as_float_array(grid, "grid", ndim=2)
    rows, cols = grid.shape
    prev = np.ones(cols + 1)
    cur = np.empty(cols + 1)
    for i in range(rows):
        cur[0] = 1.0
        a = grid[i]
        p_mid = 1.0 + 0.5 * a + a * a / 12.0
        p_old = 1.0 - a * a / 12.0
        for j in range(cols):
            cur[j + 1] = (cur[j] + prev[j + 1]) * p_mid[j] - prev[j] * p_old[j]
        prev, cur = cur, prev
    value = float(prev[cols])
    if not np.isfinite(value):
        raise NumericalError("PDE solve diverged")
    return value


def sig_kernel(x, y, cfg: KernelConfig | None = None) -> float:
    """Signature kernel of two paths under the configured static kernel."""
    if cfg is None:
        cfg = KernelConfig()
    x = check_path(x, "x")
    y = check_path(y, "y")
    if x.shape[1] != y.shape[1]:
        raise ValidationError("paths must share the channel count")
    cfg = cfg.resolved([x, y])
    _threads_from_env()
    value, max_abs = _pair_solve(
        x, y, cfg.dyadic_order, cfg.static_kernel == "rbf", cfg.gamma
    )
    _warn_if_stiff(float(max_abs))
    if not np.isfinite(value):
        raise NumericalError("PDE solve diverged")
    return float(value)


def _pivot_path(channels: int) -> np.ndarray:
    # Constant zero path; its kernel column is exactly 1 under any static kernel.
    return np.zeros((2, channels))


def gram(X, Y=None, cfg: KernelConfig | None = None,
         include_pivot: bool = False) -> Gram:
    """Kernel matrix between two path lists (symmetric when Y is omitted).

    With include_pivot, the kernel of every path against the constant zero
    path is attached (x_pivot, y_pivot, pivot_value).
    """
    if cfg is None:
        cfg = KernelConfig()
    xs = check_path_list(X, "X")
    symmetric = Y is None
    ys = xs if symmetric else check_path_list(Y, "Y")
    if xs[0].shape[1] != ys[0].shape[1]:
        raise ValidationError("X and Y must share the channel count")
    cfg = cfg.resolved(xs if symmetric else xs + ys)
    use_rbf = cfg.static_kernel == "rbf"
    _threads_from_env()

    xstack = stack_if_uniform(xs)
    ystack = xstack if symmetric else stack_if_uniform(ys)
    if symmetric and xstack is not None:
        matrix, max_abs = _gram_sym(xstack, cfg.dyadic_order, use_rbf, cfg.gamma)
        peak = float(max_abs.max())
    elif not symmetric and xstack is not None and ystack is not None:
        matrix, max_abs = _gram_cross(xstack, ystack, cfg.dyadic_order, use_rbf, cfg.gamma)
        peak = float(max_abs.max())
    else:
        # Ragged lengths: per-pair solves, canonical orientation kept by index order.
        matrix = np.empty((len(xs), len(ys)))
        peak = 0.0
        for i, xp in enumerate(xs):
            j0 = i if symmetric else 0
            for j in range(j0, len(ys)):
                v, a = _pair_solve(xp, ys[j], cfg.dyadic_order, use_rbf, cfg.gamma)
                matrix[i, j] = v
                if symmetric:
                    matrix[j, i] = v
                peak = max(peak, float(a))
    _warn_if_stiff(peak)
    _check_finite(matrix)

    x_pivot = y_pivot = None
    pivot_value = None
    if include_pivot:
        pivot = _pivot_path(xs[0].shape[1])
        x_pivot = np.empty(len(xs))
        for i, xp in enumerate(xs):
            x_pivot[i], _ = _pair_solve(xp, pivot, cfg.dyadic_order, use_rbf, cfg.gamma)
        if symmetric:
            y_pivot = x_pivot
        else:
            y_pivot = np.empty(len(ys))
            for j, yp in enumerate(ys):
                y_pivot[j], _ = _pair_solve(yp, pivot, cfg.dyadic_order, use_rbf, cfg.gamma)
        pv, _ = _pair_solve(pivot, pivot, cfg.dyadic_order, use_rbf, cfg.gamma)
        pivot_value = float(pv)
        _check_finite(x_pivot)
        _check_finite(y_pivot)
    return Gram(matrix, symmetric, cfg, x_pivot, y_pivot, pivot_value)
