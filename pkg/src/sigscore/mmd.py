"""Maximum mean discrepancy estimators over kernel matrices.

The biased (V-statistic) estimator is the reporting default; the unbiased
U-statistic drops diagonal terms and needs at least two samples per side.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import as_float_array, check_path_list
from .exceptions import ValidationError
from .sigkernel import KernelConfig, gram

ESTIMATORS = ("biased", "unbiased")
_NEG_TOL = 1e-12


@dataclass(frozen=True)
class MmdResult:
    """A squared-MMD value with the estimator and sample counts that produced it."""

    value: float
    estimator: str
    m: int
    n: int


def _check_blocks(kxx, kyy, kxy):
    kxx = as_float_array(kxx, "kxx", ndim=2)
    kyy = as_float_array(kyy, "kyy", ndim=2)
    kxy = as_float_array(kxy, "kxy", ndim=2)
    if kxx.shape[0] != kxx.shape[1] or kyy.shape[0] != kyy.shape[1]:
        raise ValidationError("within-set kernel blocks must be square")
    if kxy.shape != (kxx.shape[0], kyy.shape[0]):
        raise ValidationError("cross block shape does not match the within blocks")
    return kxx, kyy, kxy


def mmd2_biased(kxx, kyy, kxy) -> float:
    """V-statistic: mean(kxx) + mean(kyy) - 2 mean(kxy), clamped at 0 from below."""
    kxx, kyy, kxy = _check_blocks(kxx, kyy, kxy)
    value = float(np.mean(kxx)) + float(np.mean(kyy)) - 2.0 * float(np.mean(kxy))
    if value < 0.0:
        # small negatives are roundoff of a nonnegative quantity
        if value < -_NEG_TOL:
            raise ValidationError(
                f"biased MMD^2 is {value:.3e}; kernel blocks are inconsistent"
            )
        value = 0.0
    return value


def mmd2_unbiased(kxx, kyy, kxy) -> float:
    """U-statistic: off-diagonal means within sets, minus twice the cross mean."""
    kxx, kyy, kxy = _check_blocks(kxx, kyy, kxy)
    m = kxx.shape[0]
    n = kyy.shape[0]
    if m < 2 or n < 2:
        raise ValidationError("unbiased estimator needs >= 2 samples")
    sxx = (float(np.sum(kxx)) - float(np.trace(kxx))) / (m * (m - 1))
    syy = (float(np.sum(kyy)) - float(np.trace(kyy))) / (n * (n - 1))
    return sxx + syy - 2.0 * float(np.mean(kxy))


def _estimate(kxx, kyy, kxy, estimator: str) -> float:
    if estimator not in ESTIMATORS:
        raise ValidationError(f"estimator must be one of {ESTIMATORS}, got {estimator!r}")
    if estimator == "biased":
        return mmd2_biased(kxx, kyy, kxy)
    return mmd2_unbiased(kxx, kyy, kxy)


def sig_mmd(P, Q, cfg: KernelConfig | None = None,
            estimator: str = "biased") -> MmdResult:
    """Squared MMD between two path samples under the signature kernel.

    Q is treated as the reference side: when the rbf bandwidth is unset the
    median heuristic is computed from Q's rows.
    """
    P = check_path_list(P, "P")
    Q = check_path_list(Q, "Q")
    if cfg is None:
        cfg = KernelConfig()
    cfg = cfg.resolved(Q)
    kxx = gram(P, cfg=cfg).matrix
    kyy = gram(Q, cfg=cfg).matrix
    kxy = gram(P, Q, cfg=cfg).matrix
    value = _estimate(kxx, kyy, kxy, estimator)
    return MmdResult(value, estimator, len(P), len(Q))


def _flatten_paths(paths, name: str) -> np.ndarray:
    paths = check_path_list(paths, name)
    dim = paths[0].size
    for i, p in enumerate(paths):
        if p.size != dim:
            raise ValidationError(f"{name}[{i}] flattens to {p.size}, expected {dim}")
    return np.stack([p.ravel() for p in paths])


def rbf_gram(u: np.ndarray, v: np.ndarray, bandwidth: float) -> np.ndarray:
    d2 = np.sum(u * u, axis=1)[:, None] + np.sum(v * v, axis=1)[None, :] - 2.0 * (u @ v.T)
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-d2 / (2.0 * bandwidth * bandwidth))


def rbf_mmd(P, Q, bandwidth: float | None = None,
            estimator: str = "biased") -> MmdResult:
    """Plain RBF-kernel MMD on flattened trajectories (the non-sequential baseline)."""
    u = _flatten_paths(P, "P")
    v = _flatten_paths(Q, "Q")
    if u.shape[1] != v.shape[1]:
        raise ValidationError("P and Q flatten to different lengths")
    if bandwidth is None:
        # median heuristic on the reference side, over flattened vectors
        bandwidth = _median_of_rows(v)
    bandwidth = float(bandwidth)
    if not np.isfinite(bandwidth) or bandwidth <= 0:
        raise ValidationError(f"bandwidth must be positive, got {bandwidth}")
    kxx = rbf_gram(u, u, bandwidth)
    kyy = rbf_gram(v, v, bandwidth)
    kxy = rbf_gram(u, v, bandwidth)
    value = _estimate(kxx, kyy, kxy, estimator)
    return MmdResult(value, estimator, len(u), len(v))


def _median_of_rows(rows: np.ndarray) -> float:
    from scipy.spatial.distance import pdist

    if rows.shape[0] > 2000:
        idx = np.linspace(0, rows.shape[0] - 1, 2000).astype(np.int64)
        rows = rows[idx]
    dists = pdist(rows)
    if dists.size == 0:
        return 1.0
    med = float(np.median(dists))
    return med if med > 0 else 1.0
