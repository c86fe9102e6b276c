"""Small input-validation helpers in the spirit of ``sklearn.utils.validation``."""

import numbers

import numpy as np

from .exceptions import DomainError


def check_finite_array(x, name, ndim=None, min_length=1, dtype=float):
    """Return ``x`` as a contiguous float array after sanity checks."""
    arr = np.ascontiguousarray(x, dtype=dtype)
    if ndim is not None and arr.ndim != ndim:
        raise DomainError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.ndim == 0 or arr.shape[0] < min_length:
        raise DomainError(f"{name} needs at least {min_length} samples")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    return arr


def check_scalar(x, name, *, low=None, high=None, include_low=True, include_high=True):
    """Validate a real scalar against an optional interval and return it as float."""
    if isinstance(x, bool) or not isinstance(x, numbers.Real):
        raise DomainError(f"{name} must be a real number, got {type(x).__name__}")
    x = float(x)
    if not np.isfinite(x):
        raise DomainError(f"{name} must be finite, got {x}")
    if low is not None and (x < low or (x == low and not include_low)):
        op = ">=" if include_low else ">"
        raise DomainError(f"{name} must be {op} {low}, got {x}")
    if high is not None and (x > high or (x == high and not include_high)):
        op = "<=" if include_high else "<"
        raise DomainError(f"{name} must be {op} {high}, got {x}")
    return x


def check_fraction(x, name):
    """Validate a fraction in ``[0, 1)``."""
    return check_scalar(x, name, low=0.0, high=1.0, include_high=False)


def trapezoid_weights(n, dt):
    """Quadrature weights of the composite trapezoidal rule on ``n`` points."""
    w = np.full(n, dt)
    w[0] = w[-1] = 0.5 * dt
    return w
