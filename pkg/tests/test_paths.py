"""Trajectory containers, normalization and augmentation."""
import numpy as np
import pytest

from sigscore.exceptions import ValidationError
from sigscore.paths import (
    NormStats,
    Trajectory,
    augment,
    augment_all,
    fit_norm_stats,
    split_augmented,
    zero_pivot,
)


def test_trajectory_validation():
    t = Trajectory(np.array([[1.0], [2.0]]), np.array([0.0, 1.0]))
    assert t.horizon == 2 and t.variates == 1
    with pytest.raises(ValidationError, match="strictly increasing"):
        Trajectory(np.zeros((2, 1)), np.array([1.0, 1.0]))
    with pytest.raises(ValidationError, match="rows"):
        Trajectory(np.zeros((2, 1)), np.array([0.0, 1.0, 2.0]))
    with pytest.raises(ValidationError, match="non-finite"):
        Trajectory(np.array([[np.nan]]), np.array([0.0]))


def test_augment_worked_example():
    # hand-derived: T=2 univariate, identity stats, duration 1, mean step 1
    traj = Trajectory(np.array([[1.0], [3.0]]), np.array([0.0, 1.0]))
    out = augment(traj)
    expected = np.array([[0.0, 0.0], [1.0, 0.0], [3.0, 1.0], [0.0, 2.0]])
    np.testing.assert_array_equal(out, expected)


def test_augment_shape_and_boundary_rows():
    traj = Trajectory(np.random.default_rng(0).standard_normal((7, 3)),
                      np.linspace(2.0, 5.0, 7))
    out = augment(traj)
    assert out.shape == (9, 4)
    np.testing.assert_array_equal(out[0], np.zeros(4))
    np.testing.assert_array_equal(out[-1, :3], np.zeros(3))
    assert np.all(np.diff(out[:, 3]) >= 0)
    # time rescaled to [0, 1] plus one trailing mean step
    assert out[1, 3] == 0.0 and out[-2, 3] == 1.0
    assert out[-1, 3] == pytest.approx(1.0 + 1.0 / 6.0)


def test_augment_single_point_trajectory():
    traj = Trajectory(np.array([[5.0]]), np.array([3.0]))
    out = augment(traj)
    assert out.shape == (3, 2)
    np.testing.assert_array_equal(out[:, 1], [0.0, 0.0, 1.0])


def test_augment_applies_stats_and_checks_them():
    traj = Trajectory(np.array([[2.0], [4.0]]), np.array([0.0, 1.0]))
    stats = NormStats(np.array([2.0]), np.array([2.0]))
    out = augment(traj, stats)
    np.testing.assert_array_equal(out[1:-1, 0], [0.0, 1.0])
    with pytest.raises(ValidationError, match="variates"):
        augment(traj, NormStats(np.zeros(2), np.ones(2)))
    with pytest.raises(ValidationError, match="time_scale"):
        augment(traj, time_scale=-1.0)


def test_augment_roundtrip_through_split():
    traj = Trajectory(np.random.default_rng(1).standard_normal((5, 2)),
                      np.linspace(0.0, 2.0, 5))
    core, time_channel = split_augmented(augment(traj))
    np.testing.assert_array_equal(core, traj.values)
    assert time_channel.shape == (7,)
    with pytest.raises(ValidationError, match="augmented"):
        split_augmented(np.zeros((2, 3)))


def test_fit_norm_stats_pools_rows():
    a = Trajectory(np.array([[0.0, 5.0], [2.0, 5.0]]), np.array([0.0, 1.0]))
    b = Trajectory(np.array([[4.0, 5.0], [6.0, 5.0]]), np.array([0.0, 1.0]))
    stats = fit_norm_stats([a, b])
    np.testing.assert_allclose(stats.mean, [3.0, 5.0])
    # population std of {0,2,4,6} is sqrt(5); constant variate floors to 1.0
    np.testing.assert_allclose(stats.scale, [np.sqrt(5.0), 1.0])
    with pytest.raises(ValidationError, match="no training data"):
        fit_norm_stats([])


def test_norm_stats_validation_and_roundtrip():
    with pytest.raises(ValidationError, match="positive"):
        NormStats(np.zeros(2), np.array([1.0, 0.0]))
    with pytest.raises(ValidationError, match="matching"):
        NormStats(np.zeros(2), np.ones(3))
    stats = NormStats(np.array([1.0]), np.array([2.0]))
    x = np.array([[3.0], [7.0]])
    np.testing.assert_allclose(stats.invert(stats.apply(x)), x)


def test_augment_all_matches_single():
    trajs = [Trajectory(np.ones((3, 1)), np.arange(3.0)) for _ in range(2)]
    outs = augment_all(trajs)
    np.testing.assert_array_equal(outs[0], augment(trajs[0]))
    assert len(outs) == 2


def test_zero_pivot():
    p = zero_pivot(4, 2)
    assert p.shape == (6, 3)
    assert not p.any()
    with pytest.raises(ValidationError):
        zero_pivot(0, 1)
