"""Input validation helpers, in the spirit of ``sklearn.utils.validation``."""

import numbers

import numpy as np

from roughfd.exceptions import InvalidArgumentError, NumericError

# relative slack for CFL checks on step sizes computed in floating point
CFL_SLACK = 1e-12


def check_vector(values, name="values", length=None, finite=True):
    """Return ``values`` as a 1-D float64 array, validating shape and finiteness."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidArgumentError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if length is not None and arr.shape[0] != length:
        raise InvalidArgumentError(f"{name} must have length {length}, got {arr.shape[0]}")
    if finite and not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise NumericError(f"{name} has a non-finite entry at cell {bad}", cell=bad)
    return arr


def check_scalar(x, name, *, lower=None, upper=None, include_lower=True,
                 include_upper=True, integer=False):
    """Validate a scalar against an interval and return it as float (or int)."""
    if integer:
        if isinstance(x, bool) or not isinstance(x, numbers.Integral):
            raise InvalidArgumentError(f"{name} must be an integer, got {x!r}")
        x = int(x)
    else:
        if isinstance(x, bool) or not isinstance(x, numbers.Real):
            raise InvalidArgumentError(f"{name} must be a real number, got {x!r}")
        x = float(x)
        if not np.isfinite(x):
            raise InvalidArgumentError(f"{name} must be finite, got {x!r}")
    if lower is not None:
        if x < lower or (x == lower and not include_lower):
            bracket = "[" if include_lower else "("
            raise InvalidArgumentError(f"{name}={x!r} outside {bracket}{lower}, ...")
    if upper is not None:
        if x > upper or (x == upper and not include_upper):
            bracket = "]" if include_upper else ")"
            raise InvalidArgumentError(f"{name}={x!r} outside ..., {upper}{bracket}")
    return x


def check_unit_exponent(gamma, name="gamma"):
    """Exponents live in (0, 1]."""
    return check_scalar(gamma, name, lower=0.0, upper=1.0, include_lower=False)


def check_norm_order(p, allowed=(1, 2, "inf")):
    if p in ("inf", np.inf, float("inf")):
        p = "inf"
    if p not in allowed:
        raise InvalidArgumentError(f"norm order must be one of {allowed}, got {p!r}")
    return p


def check_same_grid(*gridfunctions):
    first = gridfunctions[0].grid
    for gf in gridfunctions[1:]:
        if gf.grid != first:
            raise InvalidArgumentError(f"grid mismatch: {first} vs {gf.grid}")
    return first
