"""Input validation helpers in the style of ``sklearn.utils.validation``."""

import numbers

import numpy as np
from sklearn.utils import check_array

from .exceptions import ValidationError


def check_points(X):
    """Return ``X`` as a finite float array of shape (n, 4)."""
    if np.ndim(X) == 1:
        X = np.asarray(X, dtype=float)[None, :]
    try:
        X = check_array(X, dtype=float)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    if X.shape[1] != 4:
        raise ValidationError(f"points must have 4 coordinates (a, b, c, d), got {X.shape[1]}")
    return X


def check_positive(value, name, allow_none=False):
    if value is None and allow_none:
        return None
    if not isinstance(value, numbers.Real) or isinstance(value, bool) or not np.isfinite(value) or value <= 0:
        raise ValidationError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def check_int(value, name, minimum=0, allow_none=False):
    if value is None and allow_none:
        return None
    if not isinstance(value, numbers.Integral) or isinstance(value, bool) or value < minimum:
        raise ValidationError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
