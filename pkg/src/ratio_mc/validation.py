"""Input validation helpers shared by the estimator-facing modules."""

import numpy as np

from .errors import DimensionMismatch


def check_points(x, dim=None, name="x"):
    """Coerce ``x`` to a float64 matrix of shape (n, dim).

    Accepts a single point (length-d vector), an (n, d) matrix, or, when
    dim == 1, a flat length-n vector of scalar points.  All entries must be
    finite.
    """
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        if dim is not None and dim > 1:
            if arr.shape[0] != dim:
                raise DimensionMismatch(
                    f"{name}: expected a point of dimension {dim}, got length {arr.shape[0]}"
                )
            arr = arr.reshape(1, dim)
        else:
            arr = arr.reshape(-1, 1)
    elif arr.ndim != 2:
        raise DimensionMismatch(f"{name}: expected at most 2 dimensions, got {arr.ndim}")
    if dim is not None and arr.shape[1] != dim:
        raise DimensionMismatch(
            f"{name}: expected points of dimension {dim}, got {arr.shape[1]}"
        )
    if arr.size and not np.isfinite(arr).all():
        raise ValueError(f"{name}: contains non-finite values")
    return arr


def check_labels(y, n=None, name="labels"):
    """Coerce labels to an int8 vector with values in {0, 1}."""
    arr = np.asarray(y)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    if n is not None and arr.shape[0] != n:
        raise DimensionMismatch(f"{name}: expected {n} entries, got {arr.shape[0]}")
    values = np.unique(arr)
    if not np.isin(values, (0, 1)).all():
        raise ValueError(f"{name}: values must be 0 or 1, got {values!r}")
    return arr.astype(np.int8)


def check_weights(w, name="weights"):
    """Coerce to a nonnegative float64 vector."""
    arr = np.asarray(w, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise ValueError(f"{name}: must be nonempty")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name}: contains non-finite values")
    if (arr < 0).any():
        raise ValueError(f"{name}: contains negative values")
    return arr
