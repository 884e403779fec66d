"""Input validation helpers used by the public entry points."""

from __future__ import annotations

import math

import numpy as np

from .errors import ValidationError


def check_finite_scalar(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(f"{name} must be finite, got {value!r}")
    return value


def check_positive(name: str, value: float) -> float:
    value = check_finite_scalar(name, value)
    if value <= 0:
        raise ValidationError(f"{name} must be > 0, got {value!r}")
    return value


def check_in_range(name: str, value: float, low: float, high: float,
                   inclusive: tuple[bool, bool] = (True, True)) -> float:
    value = check_finite_scalar(name, value)
    lo_ok = value >= low if inclusive[0] else value > low
    hi_ok = value <= high if inclusive[1] else value < high
    if not (lo_ok and hi_ok):
        lo_b = "[" if inclusive[0] else "("
        hi_b = "]" if inclusive[1] else ")"
        raise ValidationError(f"{name} must lie in {lo_b}{low}, {high}{hi_b}, got {value!r}")
    return value


def as_float_vector(name: str, values, min_len: int = 0) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size < min_len:
        raise ValidationError(f"{name} needs at least {min_len} entries, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


def as_float_matrix(name: str, values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


def as_binary_vector(name: str, values) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional, got shape {arr.shape}")
    out = arr.astype(np.int64, copy=True)
    if not np.array_equal(out, np.asarray(arr, dtype=float)):
        raise ValidationError(f"{name} must contain integers 0/1")
    bad = ~np.isin(out, (0, 1))
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise ValidationError(f"{name} must contain only 0/1; entry {idx} is {arr[idx]!r}")
    return out
