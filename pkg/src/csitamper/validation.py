"""Input validation helpers used at estimator and function boundaries."""

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import DomainError, EmptyInputError, ShapeError


def check_csi(X, sc=None, allow_empty=False, non_negative=True, name="X"):
    """Return ``X`` as a finite 2-D float64 array of CSI magnitudes.

    Accepts a :class:`~csitamper.csi.CsiDataset`, a single frame (1-D) or a
    frame matrix (n_frames, sc).
    """
    if hasattr(X, "magnitudes"):
        X = X.magnitudes
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[np.newaxis, :]
    if X.ndim != 2:
        raise ShapeError(f"{name} must be 1-D or 2-D, got {X.ndim} dimensions")
    if X.shape[0] == 0:
        if not allow_empty:
            raise EmptyInputError(f"{name} holds no frames")
        X = X.astype(np.float64)
    else:
        X = check_array(X, dtype=np.float64, ensure_2d=True, input_name=name)
    if sc is not None and X.shape[1] != sc:
        raise ShapeError(f"{name} has {X.shape[1]} subcarriers, expected {sc}")
    if non_negative and X.size and X.min() < 0:
        raise DomainError(f"{name} holds negative magnitudes")
    return X


def check_positive_int(value, name, minimum=1):
    if isinstance(value, (bool, np.bool_)) or int(value) != value or value < minimum:
        raise DomainError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
