"""Input validation helpers.

All numeric APIs in this package operate on float64 numpy arrays. These
helpers coerce and check inputs at the public boundaries so the numeric
kernels can assume clean data.
"""

import numpy as np

from .exceptions import ConfigurationError, DataError


def as_matrix(a, rows=None, cols=None, name="array"):
    """Coerce ``a`` to a 2-D float64 array with finite entries."""
    out = np.asarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise ConfigurationError(f"{name} must be 2-D, got shape {out.shape}")
    if rows is not None and out.shape[0] != rows:
        raise ConfigurationError(f"{name} must have {rows} rows, got {out.shape[0]}")
    if cols is not None and out.shape[1] != cols:
        raise ConfigurationError(f"{name} must have {cols} columns, got {out.shape[1]}")
    if not np.isfinite(out).all():
        raise DataError(f"{name} contains non-finite values")
    return out


def as_vector(a, size=None, name="vector"):
    """Coerce ``a`` to a 1-D float64 array with finite entries."""
    out = np.asarray(a, dtype=np.float64)
    if out.ndim != 1:
        raise ConfigurationError(f"{name} must be 1-D, got shape {out.shape}")
    if size is not None and out.shape[0] != size:
        raise ConfigurationError(f"{name} must have length {size}, got {out.shape[0]}")
    if not np.isfinite(out).all():
        raise DataError(f"{name} contains non-finite values")
    return out


def as_batch(a, width=None, name="batch"):
    """Accept a vector or matrix; return (matrix, was_vector) in float64.

    A single sample of shape (d,) is promoted to (1, d) so numeric code can
    be written batch-first throughout.
    """
    out = np.asarray(a, dtype=np.float64)
    if out.ndim == 1:
        return as_matrix(out[None, :], cols=width, name=name), True
    return as_matrix(out, cols=width, name=name), False


def check_positive(value, name):
    if not value > 0:
        raise ConfigurationError(f"{name} must be positive, got {value}")
    return value
