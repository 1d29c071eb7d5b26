"""Input validation helpers used by the public estimator and function surfaces."""

from __future__ import annotations

import numpy as np

from .exceptions import DegenerateItemError, InvalidInputError

# A row is left untouched when its norm is already this close to one, so that
# serving an already-normalised store is a bit-exact pass-through.
_UNIT_SLACK = 1e-12


def as_float_matrix(x, name="array"):
    """Coerce to a finite 2-d float64 array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def as_float_vector(x, name="vector"):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def normalize_rows(x, name="embeddings"):
    """Project rows onto the unit sphere; zero rows cannot be projected.

    Rows whose norm is already within ``1e-12`` of one are passed through
    unchanged so that round-tripping a normalised store is bit-exact.
    """
    arr = as_float_matrix(x, name)
    norms = np.linalg.norm(arr, axis=1)
    bad = np.flatnonzero(norms == 0.0)
    if bad.size:
        raise DegenerateItemError(f"{name} row {bad[0]} has zero norm")
    off = np.abs(norms - 1.0) > _UNIT_SLACK
    if not np.any(off):
        return arr
    out = arr.copy()
    out[off] /= norms[off, None]
    return out


def check_symmetric(m, name="matrix", tol=1e-9):
    m = as_float_matrix(m, name)
    if m.shape[0] != m.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {m.shape}")
    if m.size:
        scale = max(1.0, float(np.abs(m).max()))
        if float(np.abs(m - m.T).max()) > tol * scale:
            raise InvalidInputError(f"{name} is not symmetric within {tol}")
    return m


def check_item_ids(ids, n_items, name="item ids", allow_empty=True):
    """Validate a sequence of item ids against a universe of size ``n_items``."""
    arr = np.asarray(ids, dtype=np.int64).ravel()
    if not allow_empty and arr.size == 0:
        raise InvalidInputError(f"{name} must be non-empty")
    if arr.size and (arr.min() < 0 or arr.max() >= n_items):
        raise InvalidInputError(
            f"{name} out of range: universe has {n_items} items"
        )
    return arr


def check_in_range(value, lo, hi, name):
    value = float(value)
    if not np.isfinite(value) or not lo <= value <= hi:
        raise InvalidInputError(f"{name} must lie in [{lo}, {hi}], got {value}")
    return value


def check_positive_int(value, name, minimum=1):
    if not isinstance(value, (int, np.integer)) or value < minimum:
        raise InvalidInputError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_positive_vector(x, name="feedback"):
    """Strictly positive finite vector (the feedback positivity assumption)."""
    from .exceptions import AssumptionViolationError

    arr = as_float_vector(x, name)
    if arr.size and arr.min() <= 0.0:
        raise AssumptionViolationError(f"{name} must be strictly positive")
    return arr
