"""Input validation helpers."""
import numpy as np
import pytest

from sigscore._validation import (
    as_float_array,
    check_fraction,
    check_path,
    check_path_list,
    check_positive,
    stack_if_uniform,
)
from sigscore.exceptions import ValidationError


def test_as_float_array_casts_and_checks_ndim():
    arr = as_float_array([[1, 2], [3, 4]], "x", ndim=2)
    assert arr.dtype == np.float64
    with pytest.raises(ValidationError, match="2-dimensional"):
        as_float_array([1.0, 2.0], "x", ndim=2)


def test_as_float_array_rejects_non_finite():
    with pytest.raises(ValidationError, match="non-finite"):
        as_float_array([1.0, np.nan], "x")
    with pytest.raises(ValidationError, match="non-finite"):
        as_float_array([np.inf], "x")


def test_check_path_needs_two_rows():
    check_path(np.zeros((2, 1)))
    with pytest.raises(ValidationError, match="too short"):
        check_path(np.zeros((1, 3)))


def test_check_path_list_channel_consistency():
    good = [np.zeros((3, 2)), np.zeros((5, 2))]
    assert len(check_path_list(good)) == 2
    with pytest.raises(ValidationError, match="channels"):
        check_path_list([np.zeros((3, 2)), np.zeros((3, 1))])
    with pytest.raises(ValidationError, match="empty"):
        check_path_list([])


def test_check_path_list_accepts_stacked_array():
    arr = np.random.default_rng(0).standard_normal((4, 3, 2))
    out = check_path_list(arr)
    assert len(out) == 4 and out[0].shape == (3, 2)


def test_stack_if_uniform():
    uniform = [np.zeros((3, 2)), np.ones((3, 2))]
    assert stack_if_uniform(uniform).shape == (2, 3, 2)
    ragged = [np.zeros((3, 2)), np.zeros((4, 2))]
    assert stack_if_uniform(ragged) is None


def test_check_positive():
    assert check_positive(2, "x") == 2.0
    for bad in (0.0, -1.0, np.nan, np.inf):
        with pytest.raises(ValidationError, match="positive"):
            check_positive(bad, "x")


def test_check_fraction_bounds():
    assert check_fraction(1.0, "f") == 1.0
    with pytest.raises(ValidationError):
        check_fraction(0.0, "f")
    assert check_fraction(0.0, "f", open_left=False) == 0.0
    with pytest.raises(ValidationError):
        check_fraction(1.5, "f")
