"""Input validation helpers for the array-based estimator API."""

from __future__ import annotations

import numpy as np

from .events import ROI_SIDE


def check_frames(X) -> np.ndarray:
    """Coerce to a (n, 64, 64) binary uint8 frame stack."""
    X = np.asarray(X)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3 or X.shape[1:] != (ROI_SIDE, ROI_SIDE):
        raise ValueError(f"expected (n, {ROI_SIDE}, {ROI_SIDE}) frames, got {X.shape}")
    if X.dtype == bool:
        return X.astype(np.uint8)
    vals = np.unique(X)
    if not np.all(np.isin(vals, (0, 1))):
        raise ValueError("frames must be binary (0/1 occupancy)")
    return X.astype(np.uint8)


def check_positions(y, n: int) -> np.ndarray:
    """Coerce to (n, 2) integer pixel coordinates in [0, 64)."""
    y = np.asarray(y)
    if y.ndim != 2 or y.shape[1] != 2:
        raise ValueError(f"expected (n, 2) positions, got {y.shape}")
    if y.shape[0] != n:
        raise ValueError(f"{y.shape[0]} positions for {n} frames")
    if not np.issubdtype(y.dtype, np.number):
        raise ValueError("positions must be numeric")
    yi = np.rint(y).astype(np.int64)
    if np.any((yi < 0) | (yi >= ROI_SIDE)):
        raise ValueError(f"positions must lie in [0, {ROI_SIDE})")
    return yi
