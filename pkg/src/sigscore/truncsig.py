"""Truncated path signatures in the flattened tensor algebra.

Coefficients are stored level-major: level 1 (C entries), then level 2
(C^2 entries in lexicographic word order, i.e. row-major reshape of the
C x C tensor), up to the truncation depth. Level 0 is implicitly 1 and
never stored.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import as_float_array, check_path
from .exceptions import ValidationError

DEFAULT_DEPTH = 4
MAX_FLAT_LEN = 20000


def sig_dim(channels: int, depth: int) -> int:
    """Length of the flattened signature: sum of C^k for k = 1..depth."""
    if channels < 1 or depth < 1:
        raise ValidationError("channels and depth must be at least 1")
    return sum(channels ** k for k in range(1, depth + 1))


def capped_depth(channels: int, depth: int = DEFAULT_DEPTH,
                 max_len: int = MAX_FLAT_LEN) -> int:
    """Largest usable depth <= `depth` keeping the flattened length <= max_len."""
    k = depth
    while k > 1 and sig_dim(channels, k) > max_len:
        k -= 1
    return k


def level_offsets(channels: int, depth: int) -> list[int]:
    """Start offsets of each level block in the flattened vector, plus the end."""
    offs = [0]
    for k in range(1, depth + 1):
        offs.append(offs[-1] + channels ** k)
    return offs


@dataclass(frozen=True)
class TruncSig:
    """A truncated signature: channel count, depth, flattened coefficients."""

    channels: int
    depth: int
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = as_float_array(self.coeffs, "coeffs", ndim=1)
        expected = sig_dim(self.channels, self.depth)
        if coeffs.shape[0] != expected:
            raise ValidationError(
                f"coeffs length {coeffs.shape[0]} does not match sig_dim {expected}"
            )
        object.__setattr__(self, "coeffs", coeffs)

    def level(self, k: int) -> np.ndarray:
        """The level-k block, shape (C^k,)."""
        if not 1 <= k <= self.depth:
            raise ValidationError(f"level {k} outside 1..{self.depth}")
        offs = level_offsets(self.channels, self.depth)
        return self.coeffs[offs[k - 1]:offs[k]]

    @classmethod
    def zero(cls, channels: int, depth: int) -> "TruncSig":
        return cls(channels, depth, np.zeros(sig_dim(channels, depth)))


def segment_exp(increment, depth: int) -> TruncSig:
    """Signature of a single straight segment: level k is increment^(x)k / k!."""
    inc = as_float_array(increment, "increment", ndim=1)
    channels = inc.shape[0]
    levels = [inc]
    for k in range(2, depth + 1):
        levels.append(np.outer(levels[-1], inc).ravel() / k)
    return TruncSig(channels, depth, np.concatenate(levels))


def chen_concat(a: TruncSig, b: TruncSig) -> TruncSig:
    """Signature of the concatenated path via the truncated tensor product.

    Level k of the product collects a_i (x) b_j over i + j = k with the
    implicit level-0 coefficient 1 on both sides.
    """
    if a.channels != b.channels or a.depth != b.depth:
        raise ValidationError("signatures must share channels and depth")
    c = a.channels
    av = [a.level(k) for k in range(1, a.depth + 1)]
    bv = [b.level(k) for k in range(1, b.depth + 1)]
    out = []
    for k in range(1, a.depth + 1):
        acc = av[k - 1] + bv[k - 1]
        for i in range(1, k):
            acc = acc + np.outer(av[i - 1], bv[k - i - 1]).ravel()
        out.append(acc)
    return TruncSig(c, a.depth, np.concatenate(out))


def _batch_segment_levels(inc: np.ndarray, depth: int) -> list[np.ndarray]:
    # inc: (n, C) -> [(n, C), (n, C^2), ...] straight-segment signature levels
    n = inc.shape[0]
    levels = [inc]
    for k in range(2, depth + 1):
        levels.append(
            (levels[-1][:, :, None] * inc[:, None, :]).reshape(n, -1) / k
        )
    return levels


def batch_signatures(paths: np.ndarray, depth: int) -> np.ndarray:
    """Truncated signatures of a stack of paths, shape (n, L, C) -> (n, sig_dim).

    Left fold of the tensor product over straight-segment signatures,
    vectorized across the batch.
    """
    paths = as_float_array(paths, "paths", ndim=3)
    n, length, channels = paths.shape
    if length < 2:
        raise ValidationError("path too short")
    if depth < 1:
        raise ValidationError("depth must be at least 1")
    incs = np.diff(paths, axis=1)
    state = _batch_segment_levels(incs[:, 0, :], depth)
    for t in range(1, incs.shape[1]):
        seg = _batch_segment_levels(incs[:, t, :], depth)
        new_state = []
        for k in range(1, depth + 1):
            acc = state[k - 1] + seg[k - 1]
            for i in range(1, k):
                left = state[i - 1]
                right = seg[k - i - 1]
                acc = acc + (left[:, :, None] * right[:, None, :]).reshape(n, -1)
            new_state.append(acc)
        state = new_state
    return np.concatenate(state, axis=1)


def truncated_signature(path, depth: int | None = None) -> TruncSig:
    """Truncated signature of one path (rows x channels, at least 2 rows).

    Depth defaults to 4, reduced automatically so the flattened length stays
    below the package cap.
    """
    path = check_path(path)
    channels = path.shape[1]
    if depth is None:
        depth = capped_depth(channels)
    coeffs = batch_signatures(path[None, :, :], depth)[0]
    return TruncSig(channels, depth, coeffs)
