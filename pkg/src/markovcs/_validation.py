"""Input validation helpers shared by the estimators and functional API."""

import numbers

import numpy as np

from ._errors import DimensionError, NotFittedError, ValidationError


def is_power_of_two(k):
    return isinstance(k, numbers.Integral) and k >= 1 and (k & (k - 1)) == 0


def check_grid_shape(shape):
    """Return ``shape`` as a tuple of two ints, each a power of two."""
    try:
        rows, cols = (int(s) for s in shape)
    except (TypeError, ValueError):
        raise DimensionError(f"grid shape must be a pair of ints, got {shape!r}")
    if not (is_power_of_two(rows) and is_power_of_two(cols)):
        raise DimensionError(f"grid dims must be powers of two, got {rows}x{cols}")
    return rows, cols


def check_probability_vector(p, name="pi", atol=1e-12):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValidationError(f"{name} must be a non-empty 1-D array")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValidationError(f"{name} has NaN, infinite or negative entries")
    if abs(p.sum() - 1.0) > max(atol, 1e-12 * p.size):
        raise ValidationError(f"{name} sums to {p.sum()!r}, expected 1")
    return p


def check_unit_interval(x, name, closed_right=True, closed_left=True):
    x = float(x)
    lo_ok = x >= 0.0 if closed_left else x > 0.0
    hi_ok = x <= 1.0 if closed_right else x < 1.0
    if not (lo_ok and hi_ok and np.isfinite(x)):
        raise ValidationError(f"{name}={x!r} outside its allowed range in [0, 1]")
    return x


def check_positive_int(k, name, minimum=1):
    if not isinstance(k, numbers.Integral) or isinstance(k, bool) or k < minimum:
        raise ValidationError(f"{name} must be an integer >= {minimum}, got {k!r}")
    return int(k)


def check_seed(seed):
    if not isinstance(seed, numbers.Integral) or isinstance(seed, bool):
        raise ValidationError(f"seed must be an integer, got {seed!r}")
    if not 0 <= seed < 2**64:
        raise ValidationError("seed must lie in [0, 2**64)")
    return int(seed)


def check_is_fitted(estimator, attributes):
    if isinstance(attributes, str):
        attributes = [attributes]
    if not all(hasattr(estimator, a) for a in attributes):
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; call 'fit' first")
