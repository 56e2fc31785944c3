"""Small input-checking helpers shared across modules."""

import numbers

import numpy as np


def as_float_array(x, name="x"):
    """Return ``(array, is_scalar)`` for a real scalar or array-like.

    Raises ``ValueError`` on non-finite entries.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {x!r}")
    return arr, arr.ndim == 0


def restore_shape(result, is_scalar):
    if is_scalar:
        return float(result)
    return result


def is_power_of_two(n):
    return isinstance(n, numbers.Integral) and n >= 1 and (n & (n - 1)) == 0


def check_power_of_two(n, name="n"):
    if not is_power_of_two(n):
        raise ValueError(f"{name} must be a power of two, got {n!r}")
    return int(n)


def check_divides(n, n_ref, name="n"):
    n = int(n)
    if n < 1 or n_ref % n != 0:
        raise ValueError(f"{name}={n} does not divide n_ref={n_ref}")
    return n


def check_strictly_increasing(values, name):
    arr = np.asarray(values, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {list(values)!r}")
    if arr.size > 1 and not np.all(np.diff(arr) > 0):
        raise ValueError(f"{name} must be strictly increasing, got {arr.tolist()!r}")
    return arr
