"""Robust estimation, censor weights and censored MMD."""
import numpy as np
import pytest

from sigscore.censoring import (
    CensorModel,
    RobustEstimate,
    censor_weight,
    censored_kernel_block,
    consistency_factor,
    csig_mmd,
    fit_censor_model,
    fit_mcd,
    mahalanobis,
    _censored_blocks,
)
from sigscore.exceptions import ValidationError
from sigscore.mmd import mmd2_biased, sig_mmd
from sigscore.paths import Trajectory
from sigscore.sigkernel import KernelConfig, gram


@pytest.fixture(scope="module")
def fitted_censor(gp_train_windows) -> CensorModel:
    return CensorModel(sig_depth=2).fit(gp_train_windows)


def test_consistency_factor_limits():
    assert consistency_factor(1.0, 5) == 1.0
    # truncation shrinks the raw h-subset scatter, so the factor inflates
    assert consistency_factor(0.8, 3) > 1.0


def test_fit_mcd_classical_branch_is_exact():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((50, 3))
    est = fit_mcd(x, support_fraction=1.0)
    np.testing.assert_allclose(est.location, x.mean(axis=0), atol=1e-12)
    np.testing.assert_allclose(est.scatter, np.cov(x.T, bias=True), atol=1e-12)
    assert est.support_fraction == 1.0


def test_fit_mcd_classical_affine_equivariance():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((80, 3))
    a = rng.standard_normal((3, 3)) + 3.0 * np.eye(3)
    b = np.array([5.0, -2.0, 0.5])
    base = fit_mcd(x, 1.0)
    moved = fit_mcd(x @ a.T + b, 1.0)
    np.testing.assert_allclose(moved.location, base.location @ a.T + b, atol=1e-10)
    np.testing.assert_allclose(moved.scatter, a @ base.scatter @ a.T, atol=1e-10)


def test_fit_mcd_consistency_on_clean_gaussian():
    # MC oracle: the consistency-scaled scatter of clean N(0, I) data should
    # recover the identity (tolerances from a 4000-sample pilot run)
    rng = np.random.default_rng(2)
    x = rng.standard_normal((4000, 2))
    est = fit_mcd(x, 0.8, seed=1, n_init=150)
    assert np.abs(est.location).max() < 0.08
    assert np.abs(est.scatter - np.eye(2)).max() < 0.15


def test_fit_mcd_resists_planted_outliers():
    # MC oracle: 15% of rows shifted by 8 in the first coordinate
    rng = np.random.default_rng(3)
    x = rng.standard_normal((600, 3))
    x[:90, 0] += 8.0
    est = fit_mcd(x, 0.8, seed=2)
    assert np.abs(est.location).max() < 0.2
    assert np.abs(x.mean(axis=0)).max() > 1.0


def test_fit_mcd_is_deterministic():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((120, 3))
    x[:20] += 4.0
    a = fit_mcd(x, 0.8, seed=7)
    b = fit_mcd(x, 0.8, seed=7)
    np.testing.assert_array_equal(a.location, b.location)
    np.testing.assert_array_equal(a.scatter, b.scatter)


def test_fit_mcd_survives_constant_columns():
    # signature matrices carry exactly constant coordinates; the ridge keeps
    # every candidate scatter invertible
    rng = np.random.default_rng(5)
    x = np.column_stack([rng.standard_normal((200, 2)), np.full(200, 3.0)])
    est = fit_mcd(x, 0.8, seed=0)
    assert np.all(np.linalg.eigvalsh(est.scatter) > 0)
    d = mahalanobis(x, est)
    assert np.all(np.isfinite(d))


def test_fit_mcd_validation():
    rng = np.random.default_rng(6)
    with pytest.raises(ValidationError, match="underdetermined"):
        fit_mcd(rng.standard_normal((4, 5)))
    with pytest.raises(ValidationError, match="underdetermined"):
        fit_mcd(rng.standard_normal((10, 5)), support_fraction=0.5)
    with pytest.raises(ValidationError, match="positive"):
        fit_mcd(rng.standard_normal((50, 2)), n_init=0)
    with pytest.raises(ValidationError, match="support_fraction"):
        fit_mcd(rng.standard_normal((50, 2)), support_fraction=1.5)


def test_robust_estimate_validation_and_cholesky():
    with pytest.raises(ValidationError, match="scatter"):
        RobustEstimate(np.zeros(2), np.eye(3), 1.0)
    est = RobustEstimate(np.zeros(2), np.eye(2), 1.0)
    np.testing.assert_array_equal(est.cholesky(), np.eye(2))


def test_mahalanobis_worked_example():
    # hand-derived: scatter diag(4, 1), offset (2, 1) -> sqrt(1 + 1)
    est = RobustEstimate(np.zeros(2), np.diag([4.0, 1.0]), 1.0)
    assert mahalanobis(np.array([2.0, 1.0]), est) == pytest.approx(np.sqrt(2.0))
    batch = mahalanobis(np.array([[2.0, 1.0], [0.0, 0.0]]), est)
    np.testing.assert_allclose(batch, [np.sqrt(2.0), 0.0])
    with pytest.raises(ValidationError, match="dimension"):
        mahalanobis(np.zeros(3), est)


def test_censor_model_fit_attributes(fitted_censor):
    m = fitted_censor
    assert m.pca_basis_ is None
    assert m.depth_ == 2
    assert m.threshold_c_ == pytest.approx(
        np.quantile(m.train_distances_, 0.95)
    )
    # MAD standardization leaves the training spread at unit scale
    med = np.median(m.train_distances_)
    assert np.median(np.abs(m.train_distances_ - med)) == pytest.approx(1.0)
    # about 5% of training paths sit above the cut
    frac = float(np.mean(m.train_distances_ > m.threshold_c_))
    assert 0.01 <= frac <= 0.10


def test_censor_weight_midpoint_and_monotonicity(fitted_censor):
    c = fitted_censor.threshold_c_
    assert censor_weight(c, fitted_censor) == 0.5
    assert censor_weight(c + 10.0, fitted_censor) > 0.999
    assert censor_weight(max(c - 10.0, 0.0), fitted_censor) < 0.001
    # strictly increasing near the cut (the logistic saturates far away)
    grid = np.linspace(c - 0.5, c + 0.5, 21)
    w = censor_weight(grid, fitted_censor)
    assert np.all(np.diff(w) > 0)


def test_squared_threshold_variant(gp_train_windows):
    m = CensorModel(sig_depth=2, squared_threshold=True).fit(gp_train_windows)
    assert censor_weight(m.threshold_c_ ** 2, m) == 0.5


def test_censor_model_weights_on_same_law_paths(fitted_censor, gp_eval_paths):
    w = fitted_censor.weights(gp_eval_paths)
    assert w.shape == (16,)
    assert np.all((0 <= w) & (w <= 1))
    # same-law draws are mostly body mass
    assert w.mean() < 0.4


def test_with_quantile_recuts_threshold(fitted_censor, gp_eval_paths):
    low = fitted_censor.with_quantile(0.1)
    assert low.threshold_c_ == pytest.approx(
        np.quantile(fitted_censor.train_distances_, 0.1)
    )
    assert low.threshold_c_ < fitted_censor.threshold_c_
    w_low = low.weights(gp_eval_paths)
    w_high = fitted_censor.weights(gp_eval_paths)
    assert np.all(w_low >= w_high) and w_low.sum() > w_high.sum()
    # shared fitted state, not a refit
    assert low.robust_ is fitted_censor.robust_


def test_censor_model_requires_fit_and_training_data():
    with pytest.raises(ValidationError, match="not fitted"):
        CensorModel().distances([np.zeros((3, 2))])
    with pytest.raises(ValidationError, match="no training data"):
        CensorModel().fit([])
    bad = [Trajectory(np.zeros((3, 1)), np.arange(3.0))]
    with pytest.raises(ValidationError, match="quantile"):
        CensorModel(quantile=1.5).fit(bad)


def test_censor_model_rejects_mismatched_channels(fitted_censor):
    with pytest.raises(ValidationError, match="dimension"):
        fitted_censor.distances([np.zeros((5, 5))])


def test_pca_engages_above_variate_limit():
    # rank-2 data in 12 variates: the basis keeps few orthonormal columns
    rng = np.random.default_rng(7)
    times = np.arange(6.0)
    loadings = rng.standard_normal((2, 12))
    trajs = [
        Trajectory(rng.standard_normal((6, 2)) @ loadings
                   + 0.01 * rng.standard_normal((6, 12)), times)
        for _ in range(48)
    ]
    m = CensorModel(sig_depth=2).fit(trajs)
    basis = m.pca_basis_
    assert basis is not None and basis.shape[0] == 12
    assert basis.shape[1] <= 3
    np.testing.assert_allclose(basis.T @ basis, np.eye(basis.shape[1]), atol=1e-10)
    aug = [np.zeros((8, 13)) for _ in range(2)]
    assert m.distances(aug).shape == (2,)


def test_censor_model_json_roundtrip(fitted_censor, gp_eval_paths, tmp_path):
    doc = fitted_censor.to_json()
    clone = CensorModel.from_json(doc)
    np.testing.assert_array_equal(clone.distances(gp_eval_paths),
                                  fitted_censor.distances(gp_eval_paths))
    np.testing.assert_array_equal(clone.weights(gp_eval_paths),
                                  fitted_censor.weights(gp_eval_paths))
    path = tmp_path / "censor.json"
    fitted_censor.save(path)
    loaded = CensorModel.load(path)
    assert loaded.threshold_c_ == fitted_censor.threshold_c_
    with pytest.raises(ValidationError, match="not a censor model"):
        CensorModel.from_json({"schema": "something"})
    with pytest.raises(ValidationError, match="version"):
        CensorModel.from_json({**doc, "version": 99})


def test_fit_censor_model_wrapper(gp_train_windows):
    m = fit_censor_model(gp_train_windows, quantile=0.9, sig_depth=2)
    assert m.quantile == 0.9 and hasattr(m, "robust_")


def test_censored_kernel_block_worked_example():
    # hand-derived single entry: w_x=0.5, w_y=1, k=2, k(x,0)=3, k(0,y)=7, k00=11
    block = censored_kernel_block(np.array([[2.0]]), np.array([0.5]),
                                  np.array([1.0]), np.array([3.0]),
                                  np.array([7.0]), 11.0)
    assert block[0, 0] == pytest.approx(4.5)


def test_censored_kernel_block_limits():
    rng = np.random.default_rng(8)
    k = rng.standard_normal((3, 4))
    kx0 = rng.standard_normal(3)
    k0y = rng.standard_normal(4)
    keep = censored_kernel_block(k, np.ones(3), np.ones(4), kx0, k0y, 5.0)
    np.testing.assert_array_equal(keep, k)
    drop = censored_kernel_block(k, np.zeros(3), np.zeros(4), kx0, k0y, 5.0)
    np.testing.assert_array_equal(drop, np.full((3, 4), 5.0))


def test_csig_limits_through_blocks(gp_eval_paths):
    # with unit weights the censored MMD must reproduce the plain one
    # bit-for-bit on identical Grams; with zero weights it vanishes exactly
    cfg = KernelConfig(bandwidth=1.0)
    X, Y = gp_eval_paths[:8], gp_eval_paths[8:]
    gxx = gram(X, cfg=cfg, include_pivot=True)
    gyy = gram(Y, cfg=cfg, include_pivot=True)
    gxy = gram(X, Y, cfg=cfg, include_pivot=True)
    ones_x, ones_y = np.ones(8), np.ones(8)
    blocks = _censored_blocks(gxx, gyy, gxy, ones_x, ones_y)
    plain = mmd2_biased(gxx.matrix, gyy.matrix, gxy.matrix)
    assert mmd2_biased(*blocks) == plain
    zero_blocks = _censored_blocks(gxx, gyy, gxy, np.zeros(8), np.zeros(8))
    assert mmd2_biased(*zero_blocks) == 0.0


def test_csig_mmd_gram_reuse_matches_direct(fitted_censor, gp_eval_paths):
    cfg = KernelConfig(bandwidth=1.0)
    X, Y = gp_eval_paths[:8], gp_eval_paths[8:]
    direct = csig_mmd(X, Y, fitted_censor, cfg=cfg)
    gxx = gram(X, cfg=cfg, include_pivot=True)
    gyy = gram(Y, cfg=cfg, include_pivot=True)
    gxy = gram(X, Y, cfg=cfg, include_pivot=True)
    reused = csig_mmd(X, Y, fitted_censor, grams=(gxx, gyy, gxy))
    assert reused.value == direct.value
    with pytest.raises(ValidationError, match="pivot"):
        csig_mmd(X, Y, fitted_censor,
                 grams=(gram(X, cfg=cfg), gyy, gram(X, Y, cfg=cfg)))


def test_csig_same_law_sits_below_sig(fitted_censor, gp_eval_paths):
    cfg = KernelConfig(bandwidth=1.0)
    X, Y = gp_eval_paths[:8], gp_eval_paths[8:]
    c = csig_mmd(X, Y, fitted_censor, cfg=cfg).value
    s = sig_mmd(X, Y, cfg).value
    assert c < s


def test_pivot_absorption(fitted_censor, gp_eval_paths):
    # perturbing a path whose weight is ~0 must not move the censored MMD
    cfg = KernelConfig(bandwidth=1.0)
    X = [p.copy() for p in gp_eval_paths[:8]]
    Y = gp_eval_paths[8:]
    w = fitted_censor.weights(X)
    idx = int(np.argmin(w))
    assert w[idx] < 1e-6
    base = csig_mmd(X, Y, fitted_censor, cfg=cfg).value
    rng = np.random.default_rng(9)
    # perturb interior values only, keeping the augmented structure valid
    X[idx][1:-1, :-1] += 0.005 * rng.standard_normal(X[idx][1:-1, :-1].shape)
    assert fitted_censor.weights(X)[idx] < 1e-6
    moved = csig_mmd(X, Y, fitted_censor, cfg=cfg).value
    assert abs(moved - base) < 1e-8
