"""Input validation helpers shared by the estimators and metric functions."""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError


def as_float_matrix(x, name: str = "X") -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting NaN/inf."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains NaN or infinite values")
    return arr


def as_binary_vector(y, name: str = "y") -> np.ndarray:
    """Coerce to a 1-D int array with values in {0, 1}."""
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    out = arr.astype(np.int64, copy=True)
    if arr.dtype.kind == "f" and not np.array_equal(out, arr):
        raise ValueError(f"{name} has non-integer values")
    bad = (out != 0) & (out != 1)
    if bad.any():
        raise ValueError(f"{name} must be binary 0/1, found {arr[bad][:5]!r}")
    return out


def as_group_vector(s, name: str = "sensitive") -> np.ndarray:
    """Coerce to a 1-D int array of non-negative group ids."""
    arr = np.asarray(s)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    out = arr.astype(np.int64, copy=True)
    if arr.dtype.kind == "f" and not np.array_equal(out, arr):
        raise ValueError(f"{name} has non-integer values")
    if (out < 0).any():
        raise ValueError(f"{name} has negative group ids")
    return out


def check_same_length(*pairs: tuple[str, object]) -> int:
    """Check that every named sequence has the same length; return it."""
    lengths = {name: len(np.asarray(val)) for name, val in pairs}
    distinct = set(lengths.values())
    if len(distinct) > 1:
        detail = ", ".join(f"{k}={v}" for k, v in lengths.items())
        raise ValueError(f"length mismatch: {detail}")
    return distinct.pop()


def check_feature_count(expected: int, actual: int, what: str) -> None:
    if expected != actual:
        raise DimensionMismatchError(
            f"{what}: expected {expected} columns, got {actual}"
        )
