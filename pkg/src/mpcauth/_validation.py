"""Small input checks used across the package."""

import math

import numpy as np

from .exceptions import InvalidArgumentError


def check_finite(value, name):
    try:
        value = float(value)
    except (TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"{name} must be a real number, got {value!r}") from exc
    if not math.isfinite(value):
        raise InvalidArgumentError(f"{name} must be finite, got {value!r}")
    return value


def check_positive(value, name, strict=True):
    value = check_finite(value, name)
    if value < 0 or (strict and value == 0):
        bound = "> 0" if strict else ">= 0"
        raise InvalidArgumentError(f"{name} must be {bound}, got {value!r}")
    return value


def check_unit_interval(value, name):
    value = check_finite(value, name)
    if not 0.0 <= value <= 1.0:
        raise InvalidArgumentError(f"{name} must lie in [0, 1], got {value!r}")
    return value


def as_score_array(values, name="scores", allow_empty=False):
    """Return ``values`` as a 1-d float array of scores in [0, 1]."""
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.size == 0 and not allow_empty:
        raise InvalidArgumentError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    if np.any((arr < 0.0) | (arr > 1.0)):
        raise InvalidArgumentError(f"{name} must lie in [0, 1]")
    return arr
