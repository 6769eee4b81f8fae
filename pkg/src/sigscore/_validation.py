"""Input validation helpers shared across the package."""
from __future__ import annotations

import numpy as np

from .exceptions import ValidationError


def as_float_array(x, name: str, ndim: int | None = None) -> np.ndarray:
    """Coerce to a float64 ndarray, checking dimensionality and finiteness."""
    arr = np.asarray(x, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise ValidationError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def check_path(path, name: str = "path") -> np.ndarray:
    """A path is a 2-d float matrix with at least 2 rows."""
    arr = as_float_array(path, name, ndim=2)
    if arr.shape[0] < 2:
        raise ValidationError("path too short")
    return arr


def check_path_list(paths, name: str = "paths") -> list[np.ndarray]:
    """Validate a non-empty list of paths with a consistent channel count."""
    if isinstance(paths, np.ndarray) and paths.ndim == 3:
        paths = list(paths)
    if len(paths) == 0:
        raise ValidationError(f"{name} is empty")
    out = [check_path(p, f"{name}[{i}]") for i, p in enumerate(paths)]
    channels = out[0].shape[1]
    for i, p in enumerate(out):
        if p.shape[1] != channels:
            raise ValidationError(
                f"{name}[{i}] has {p.shape[1]} channels, expected {channels}"
            )
    return out


def stack_if_uniform(paths: list[np.ndarray]) -> np.ndarray | None:
    """Stack a path list into (n, L, C) when all lengths agree, else None."""
    length = paths[0].shape[0]
    if all(p.shape[0] == length for p in paths):
        return np.stack(paths)
    return None


def check_positive(value, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValidationError(f"{name} must be positive, got {value}")
    return value


def check_fraction(value, name: str, open_left: bool = True) -> float:
    value = float(value)
    ok = (0 < value <= 1) if open_left else (0 <= value <= 1)
    if not ok:
        raise ValidationError(f"{name} must lie in (0, 1], got {value}")
    return value
