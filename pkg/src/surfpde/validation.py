"""Input validation helpers used throughout the public API."""

import numpy as np

from .errors import DimensionMismatchError


def as_float_array(x, name="array"):
    """Coerce to a float64 ndarray, rejecting non-finite entries."""
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def check_points(X, name="X"):
    """Validate an (N, 3) array of 3D points; a single point is promoted."""
    arr = as_float_array(X, name)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise DimensionMismatchError(f"{name} must have shape (N, 3), got {arr.shape}")
    return arr


def check_point(x, name="x"):
    arr = as_float_array(x, name).reshape(-1)
    if arr.shape != (3,):
        raise DimensionMismatchError(f"{name} must be a 3-vector, got shape {arr.shape}")
    return arr


def check_unit(v, name="vector", tol=1e-8):
    arr = as_float_array(v, name)
    norms = np.linalg.norm(arr, axis=-1)
    if np.any(np.abs(norms - 1.0) > tol):
        worst = float(np.max(np.abs(norms - 1.0)))
        raise ValueError(f"{name} must be unit length (|norm-1| = {worst:.3e} > {tol:.0e})")
    return arr


def check_rng(seed):
    """Accept an int seed or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def check_positive(value, name):
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value!r}")
    return value
