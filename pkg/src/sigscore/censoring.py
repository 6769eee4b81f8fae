"""Tail censoring of path distributions in truncated-signature space.

A robust location/scatter estimate (FAST-MCD) is fitted to the truncated
signatures of training windows. Paths whose robust Mahalanobis distance
falls below a quantile threshold are smoothly relocated to the constant
zero path through a logistic weight, so the censored MMD only compares
the tail mass of two samples.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from scipy.stats import chi2
from sklearn.base import BaseEstimator

from ._validation import (
    as_float_array,
    check_fraction,
    check_path_list,
    check_positive,
    stack_if_uniform,
)
from .exceptions import NumericalError, ValidationError
from .mmd import MmdResult, mmd2_biased
from .paths import NormStats, Trajectory, augment, fit_norm_stats, split_augmented
from .sigkernel import Gram, KernelConfig, gram
from .truncsig import batch_signatures, capped_depth

MCD_RIDGE = 1e-6
PCA_MAX_VARIATES = 10
SCHEMA = "sigscore.censor_model"
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class RobustEstimate:
    """Robust location and scatter with the support fraction that produced them."""

    location: np.ndarray
    scatter: np.ndarray
    support_fraction: float

    def __post_init__(self):
        loc = as_float_array(self.location, "location", ndim=1)
        sca = as_float_array(self.scatter, "scatter", ndim=2)
        if sca.shape != (loc.shape[0], loc.shape[0]):
            raise ValidationError("scatter shape does not match location")
        object.__setattr__(self, "location", loc)
        object.__setattr__(self, "scatter", sca)

    def cholesky(self) -> np.ndarray:
        try:
            return np.linalg.cholesky(self.scatter)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("robust scatter is not positive definite") from exc


def _ml_cov(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # maximum-likelihood covariance (divide by n); rows (n, p)
    loc = rows.mean(axis=0)
    centered = rows - loc
    return loc, centered.T @ centered / rows.shape[0]


def _batched_cov(data: np.ndarray, supports: np.ndarray):
    # data (n, p), supports (B, h) index arrays -> (B, p), (B, p, p)
    sel = data[supports]
    locs = sel.mean(axis=1)
    centered = sel - locs[:, None, :]
    covs = np.einsum("bhi,bhj->bij", centered, centered) / supports.shape[1]
    return locs, covs


def _ridge_candidates(covs: np.ndarray) -> np.ndarray:
    # Signature features can carry exactly constant coordinates (the
    # augmentation returns every path to zero), so candidate scatters are
    # floored here to keep C-step distances and determinants finite.
    p = covs.shape[-1]
    scale = MCD_RIDGE * (np.trace(covs, axis1=-2, axis2=-1) / p)
    return covs + scale[:, None, None] * np.eye(p)


def _batched_sq_dists(data, locs, covs):
    # squared Mahalanobis distances of all points under each candidate
    b, p = locs.shape
    diffs = data[None, :, :] - locs[:, None, :]
    sign, logdet = np.linalg.slogdet(covs)
    bad = (sign <= 0) | ~np.isfinite(logdet)
    safe = covs.copy()
    if np.any(bad):
        safe[bad] = np.eye(p)
    sol = np.linalg.solve(safe, np.swapaxes(diffs, 1, 2))
    d2 = np.einsum("bnp,bpn->bn", diffs, sol)
    if np.any(bad):
        d2[bad] = np.inf
    return d2, logdet, bad


def consistency_factor(support_fraction: float, p: int) -> float:
    """Croux-Haesbroeck scaling making the h-subset scatter Fisher consistent.

    Equals 1 at support_fraction 1, so the classical estimate passes through.
    """
    alpha = check_fraction(support_fraction, "support_fraction")
    if alpha >= 1.0:
        return 1.0
    q = chi2.ppf(alpha, p)
    return alpha / float(chi2.cdf(q, p + 2))


def fit_mcd(data, support_fraction: float = 0.8, seed: int = 0,
            n_init: int = 500, max_csteps: int = 100) -> RobustEstimate:
    """FAST-MCD robust location/scatter.

    Draws n_init random (p+1)-subsets, iterates C-steps on each until its
    h-subset is stable (h = ceil(support_fraction * n)), keeps the candidate
    with minimal scatter determinant, applies the consistency scaling and
    adds the ridge MCD_RIDGE * trace/p * I. With support_fraction 1 this
    degenerates to the classical sample mean and ML covariance, unscaled
    and unridged, so affine equivariance is exact.
    """
    data = as_float_array(data, "data", ndim=2)
    n, p = data.shape
    sf = check_fraction(support_fraction, "support_fraction")
    if n_init < 1 or max_csteps < 1:
        raise ValidationError("n_init and max_csteps must be positive")
    if n <= p:
        raise ValidationError("MCD underdetermined: increase PCA reduction or reduce depth")
    if sf >= 1.0:
        loc, cov = _ml_cov(data)
        return RobustEstimate(loc, cov, 1.0)
    h = math.ceil(sf * n)
    if h <= p:
        raise ValidationError("MCD underdetermined: increase PCA reduction or reduce depth")

    rng = np.random.default_rng(seed)
    seeds = np.empty((n_init, p + 1), dtype=np.int64)
    for b in range(n_init):
        seeds[b] = rng.choice(n, size=p + 1, replace=False)
    locs, covs = _batched_cov(data, seeds)
    covs = _ridge_candidates(covs)

    supports = np.full((n_init, h), -1, dtype=np.int64)
    active = np.ones(n_init, dtype=bool)
    for _ in range(max_csteps):
        if not np.any(active):
            break
        d2, _, _ = _batched_sq_dists(data, locs[active], covs[active])
        new_support = np.sort(np.argsort(d2, axis=1, kind="stable")[:, :h], axis=1)
        idx = np.flatnonzero(active)
        unchanged = np.all(new_support == supports[idx], axis=1)
        supports[idx] = new_support
        locs[idx], covs[idx] = _batched_cov(data, new_support)
        covs[idx] = _ridge_candidates(covs[idx])
        active[idx[unchanged]] = False

    _, logdet, bad = _batched_sq_dists(data, locs, covs)
    logdet = np.where(bad, np.inf, logdet)
    if not np.any(np.isfinite(logdet)):
        raise NumericalError("all MCD candidates produced singular scatter")
    best = int(np.argmin(logdet))
    loc, cov = _ml_cov(data[supports[best]])
    scatter = cov * consistency_factor(sf, p)
    scatter = scatter + MCD_RIDGE * (np.trace(scatter) / p) * np.eye(p)
    return RobustEstimate(loc, scatter, sf)


def mahalanobis(x, robust: RobustEstimate) -> float | np.ndarray:
    """Robust Mahalanobis distance, solved through the Cholesky factor.

    Accepts one vector (p,) or a matrix of rows (n, p); never forms the
    inverse scatter explicitly.
    """
    arr = as_float_array(x, "x")
    single = arr.ndim == 1
    rows = arr[None, :] if single else arr
    if rows.ndim != 2 or rows.shape[1] != robust.location.shape[0]:
        raise ValidationError("input dimension does not match the robust estimate")
    chol = robust.cholesky()
    from scipy.linalg import solve_triangular

    z = solve_triangular(chol, (rows - robust.location).T, lower=True)
    d = np.sqrt(np.sum(z * z, axis=0))
    return float(d[0]) if single else d


def censor_weight(distance, model: "CensorModel") -> float | np.ndarray:
    """Logistic retention weight for a standardized Mahalanobis distance.

    Distances are on the model's standardized scale (raw distance divided by
    dist_scale_). At the threshold the weight is exactly 0.5; it approaches
    1 deep in the tail and 0 deep in the body.
    """
    model._require_fitted()
    d = np.asarray(distance, dtype=np.float64)
    c = model.threshold_c_ ** 2 if model.squared_threshold else model.threshold_c_
    w = expit(model.beta * (d - c))
    return float(w) if np.isscalar(distance) or d.ndim == 0 else w


class CensorModel(BaseEstimator):
    """Fitted tail-censoring model over truncated-signature features.

    Parameters are sklearn-style constructor arguments; fitting stores the
    normalization stats, the optional variate-reduction basis, the robust
    signature-space estimate, and the standardized distance threshold.

    Parameters
    ----------
    quantile : training-distance quantile that sets the censoring threshold.
    beta : logistic steepness on the MAD-standardized distance scale.
    sig_depth : requested signature depth (capped by the flattened-length limit).
    pca_variance : explained-variance target when variate reduction engages.
    pca_max_variates : reduction engages when the trajectory has more variates.
    support_fraction : MCD support fraction.
    squared_threshold : compare distances against threshold_c_^2 instead
        (the alternative reading of the logistic's centering).
    seed : RNG seed for the MCD subset draws.
    n_init : number of MCD starting subsets.
    """

    def __init__(self, quantile: float = 0.95, beta: float = 10.0,
                 sig_depth: int = 4, pca_variance: float = 0.8,
                 pca_max_variates: int = PCA_MAX_VARIATES,
                 support_fraction: float = 0.8,
                 squared_threshold: bool = False,
                 seed: int = 0, n_init: int = 500):
        self.quantile = quantile
        self.beta = beta
        self.sig_depth = sig_depth
        self.pca_variance = pca_variance
        self.pca_max_variates = pca_max_variates
        self.support_fraction = support_fraction
        self.squared_threshold = squared_threshold
        self.seed = seed
        self.n_init = n_init

    def _require_fitted(self):
        if not hasattr(self, "robust_"):
            raise ValidationError("censor model is not fitted")

    def fit(self, trajectories) -> "CensorModel":
        check_fraction(self.quantile, "quantile", open_left=False)
        check_positive(self.beta, "beta")
        trajectories = list(trajectories)
        if not trajectories:
            raise ValidationError("no training data")
        self.norm_ = fit_norm_stats(trajectories)
        variates = trajectories[0].variates
        self.pca_basis_ = None
        if variates > self.pca_max_variates:
            self.pca_basis_ = self._fit_pca_basis(trajectories)
        feature_variates = variates if self.pca_basis_ is None else self.pca_basis_.shape[1]
        self.depth_ = capped_depth(feature_variates + 1, self.sig_depth)
        aug = [self._feature_path(augment(t, self.norm_)) for t in trajectories]
        sigs = self._signature_matrix(aug)
        self.robust_ = fit_mcd(sigs, self.support_fraction,
                               seed=self.seed, n_init=self.n_init)
        raw = mahalanobis(sigs, self.robust_)
        mad = float(np.median(np.abs(raw - np.median(raw))))
        self.dist_scale_ = mad if mad > 1e-12 else 1.0
        self.train_distances_ = raw / self.dist_scale_
        self.threshold_c_ = float(np.quantile(self.train_distances_, self.quantile))
        return self

    def _fit_pca_basis(self, trajectories) -> np.ndarray:
        pooled = np.vstack([self.norm_.apply(t.values) for t in trajectories])
        # pooled rows are exactly centered: the stats came from these rows
        _, svals, vt = np.linalg.svd(pooled, full_matrices=False)
        var = svals ** 2
        ratio = np.cumsum(var) / np.sum(var)
        keep = int(np.searchsorted(ratio, self.pca_variance) + 1)
        return vt[:keep].T

    def _feature_path(self, augmented: np.ndarray) -> np.ndarray:
        """Project an augmented path onto the reduced variate basis, keeping time."""
        if self.pca_basis_ is None:
            return augmented
        core, time_channel = split_augmented(augmented)
        reduced = core @ self.pca_basis_
        out = np.zeros((augmented.shape[0], reduced.shape[1] + 1))
        out[1:-1, :-1] = reduced
        out[:, -1] = time_channel
        return out

    def _signature_matrix(self, paths: list[np.ndarray]) -> np.ndarray:
        stacked = stack_if_uniform(paths)
        if stacked is not None:
            return batch_signatures(stacked, self.depth_)
        return np.vstack([batch_signatures(p[None], self.depth_) for p in paths])

    def distances(self, paths) -> np.ndarray:
        """Raw robust Mahalanobis distances of augmented paths."""
        self._require_fitted()
        paths = check_path_list(paths, "paths")
        sigs = self._signature_matrix([self._feature_path(p) for p in paths])
        return np.atleast_1d(mahalanobis(sigs, self.robust_))

    def weights(self, paths) -> np.ndarray:
        """Retention weights of augmented paths (0 = body, 1 = tail)."""
        return np.atleast_1d(censor_weight(self.distances(paths) / self.dist_scale_, self))

    def with_quantile(self, quantile: float) -> "CensorModel":
        """Copy of the fitted model with the threshold recut at another quantile."""
        self._require_fitted()
        check_fraction(quantile, "quantile", open_left=False)
        clone = CensorModel(**self.get_params())
        clone.quantile = quantile
        for attr in ("norm_", "pca_basis_", "depth_", "robust_",
                     "dist_scale_", "train_distances_"):
            setattr(clone, attr, getattr(self, attr))
        clone.threshold_c_ = float(np.quantile(clone.train_distances_, quantile))
        return clone

    def to_json(self) -> dict:
        self._require_fitted()
        return {
            "schema": SCHEMA,
            "version": SCHEMA_VERSION,
            "params": self.get_params(),
            "norm": {"mean": self.norm_.mean.tolist(),
                     "scale": self.norm_.scale.tolist()},
            "pca_basis": None if self.pca_basis_ is None else self.pca_basis_.tolist(),
            "depth": self.depth_,
            "robust": {
                "location": self.robust_.location.tolist(),
                "scatter": self.robust_.scatter.tolist(),
                "support_fraction": self.robust_.support_fraction,
            },
            "dist_scale": self.dist_scale_,
            "train_distances": self.train_distances_.tolist(),
            "threshold_c": self.threshold_c_,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "CensorModel":
        if doc.get("schema") != SCHEMA:
            raise ValidationError(f"not a censor model document: {doc.get('schema')!r}")
        if doc.get("version") != SCHEMA_VERSION:
            raise ValidationError(f"unsupported censor model version {doc.get('version')!r}")
        model = cls(**doc["params"])
        model.norm_ = NormStats(np.array(doc["norm"]["mean"]),
                                np.array(doc["norm"]["scale"]))
        basis = doc["pca_basis"]
        model.pca_basis_ = None if basis is None else np.array(basis)
        model.depth_ = int(doc["depth"])
        model.robust_ = RobustEstimate(
            np.array(doc["robust"]["location"]),
            np.array(doc["robust"]["scatter"]),
            float(doc["robust"]["support_fraction"]),
        )
        model.dist_scale_ = float(doc["dist_scale"])
        model.train_distances_ = np.array(doc["train_distances"])
        model.threshold_c_ = float(doc["threshold_c"])
        return model

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, sort_keys=True, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "CensorModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def fit_censor_model(train, quantile: float = 0.95, beta: float = 10.0,
                     sig_depth: int = 4, pca_variance: float = 0.8,
                     **kwargs) -> CensorModel:
    """Fit a CensorModel on training trajectories (functional form)."""
    return CensorModel(quantile=quantile, beta=beta, sig_depth=sig_depth,
                       pca_variance=pca_variance, **kwargs).fit(train)


def censored_kernel_block(k_block: np.ndarray, wx: np.ndarray, wy: np.ndarray,
                          kx0: np.ndarray, k0y: np.ndarray, k00: float) -> np.ndarray:
    """Kernel matrix of the censored measures.

    Entry (i, j) mixes the original kernel with the pivot columns according
    to the retention weights: w_i w_j k(x_i, y_j) + w_i (1-w_j) k(x_i, 0)
    + (1-w_i) w_j k(0, y_j) + (1-w_i)(1-w_j) k(0, 0).
    """
    wx = np.asarray(wx, dtype=np.float64)
    wy = np.asarray(wy, dtype=np.float64)
    cx = 1.0 - wx
    cy = 1.0 - wy
    return (wx[:, None] * wy[None, :] * k_block
            + (wx * kx0)[:, None] * cy[None, :]
            + cx[:, None] * (wy * k0y)[None, :]
            + cx[:, None] * cy[None, :] * k00)


def _censored_blocks(gxx: Gram, gyy: Gram, gxy: Gram,
                     wx: np.ndarray, wy: np.ndarray):
    k00 = gxy.pivot_value
    kxx = censored_kernel_block(gxx.matrix, wx, wx, gxx.x_pivot, gxx.x_pivot, k00)
    kyy = censored_kernel_block(gyy.matrix, wy, wy, gyy.x_pivot, gyy.x_pivot, k00)
    kxy = censored_kernel_block(gxy.matrix, wx, wy, gxy.x_pivot, gxy.y_pivot, k00)
    return kxx, kyy, kxy


def csig_mmd(P, Q, model: CensorModel, cfg: KernelConfig | None = None,
             grams: tuple[Gram, Gram, Gram] | None = None) -> MmdResult:
    """Censored signature MMD between two path samples.

    Weights come from the fitted censor model; mass below the threshold is
    relocated to the constant zero path on both sides. With all weights 1
    this reproduces sig_mmd exactly; with all weights 0 it is exactly 0.
    Precomputed Grams (with pivot columns) can be passed to avoid repeated
    kernel solves.
    """
    model._require_fitted()
    P = check_path_list(P, "P")
    Q = check_path_list(Q, "Q")
    if grams is None:
        if cfg is None:
            cfg = KernelConfig()
        cfg = cfg.resolved(Q)
        gxx = gram(P, cfg=cfg, include_pivot=True)
        gyy = gram(Q, cfg=cfg, include_pivot=True)
        gxy = gram(P, Q, cfg=cfg, include_pivot=True)
    else:
        gxx, gyy, gxy = grams
        if gxx.x_pivot is None or gyy.x_pivot is None or gxy.pivot_value is None:
            raise ValidationError("precomputed Grams must include pivot columns")
    wx = model.weights(P)
    wy = model.weights(Q)
    kxx, kyy, kxy = _censored_blocks(gxx, gyy, gxy, wx, wy)
    value = mmd2_biased(kxx, kyy, kxy)
    return MmdResult(value, "biased", len(P), len(Q))
