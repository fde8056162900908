"""Input validation helpers shared by the estimators."""

from __future__ import annotations

import numbers

import numpy as np

from .exceptions import SpecError


def check_points(X, dim=None, *, name="X"):
    """Return ``X`` as a float64 array of shape ``(n_points, dim)``.

    A single point given as a 1-d array is promoted to shape ``(1, dim)``.
    Non-finite entries are rejected.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        if dim is not None and dim != 1 and X.shape[0] == dim:
            X = X.reshape(1, dim)
        else:
            X = X.reshape(-1, 1) if dim in (None, 1) else X.reshape(1, -1)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {X.shape}")
    if dim is not None and X.shape[1] != dim:
        raise ValueError(f"{name} has {X.shape[1]} columns, expected {dim}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite entries")
    return X


def check_int(value, name, *, min_value=None):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise SpecError(f"{name} must be an integer, got {value!r}")
    if min_value is not None and value < min_value:
        raise SpecError(f"{name} must be >= {min_value}, got {value}")
    return int(value)


def check_real(value, name, *, low=None, high=None, low_open=False, high_open=False):
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise SpecError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not np.isfinite(value):
        raise SpecError(f"{name} must be finite")
    if low is not None and (value < low or (low_open and value == low)):
        raise SpecError(f"{name}={value} out of range")
    if high is not None and (value > high or (high_open and value == high)):
        raise SpecError(f"{name}={value} out of range")
    return value


def check_box(box, dim=None):
    """Validate an axis-aligned box given as ``(lo, hi)``."""
    lo, hi = (np.atleast_1d(np.asarray(b, dtype=float)) for b in box)
    if lo.shape != hi.shape or lo.ndim != 1:
        raise SpecError("box bounds must be 1-d arrays of equal length")
    if dim is not None and lo.shape[0] != dim:
        raise SpecError(f"box has dimension {lo.shape[0]}, expected {dim}")
    if not np.all(hi > lo):
        raise SpecError("box must have positive side lengths")
    return lo, hi


def multi_indices(m, order):
    """All multi-indices of ``m`` variables with total degree ``order``."""
    if m == 1:
        return [(order,)]
    out = []
    for first in range(order, -1, -1):
        for rest in multi_indices(m - 1, order - first):
            out.append((first,) + rest)
    return out
