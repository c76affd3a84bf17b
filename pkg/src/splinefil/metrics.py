"""Hausdorff-type distances between finite point sets in the plane."""

from __future__ import annotations

import numpy as np

from .errors import EmptySetError

_CHUNK = 2048


def _as_set(a) -> np.ndarray:
    pts = getattr(a, "points", a)
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 1 and pts.size == 2:
        pts = pts[None, :]
    if pts.size == 0:
        raise EmptySetError("distance to or from an empty point set is undefined")
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"expected points of shape (m, 2), got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("point coordinates must be finite")
    return pts


def nearest_distances(a, b) -> np.ndarray:
    """For each point of ``a`` the distance to its nearest neighbour in ``b``."""
    A, B = _as_set(a), _as_set(b)
    out = np.empty(A.shape[0])
    for s in range(0, A.shape[0], _CHUNK):
        blk = A[s:s + _CHUNK]
        dx = blk[:, 0, None] - B[None, :, 0]
        dy = blk[:, 1, None] - B[None, :, 1]
        out[s:s + _CHUNK] = np.sqrt(np.min(dx * dx + dy * dy, axis=1))
    return out


def directed_distance(a, b) -> float:
    """``sup_{x in a} inf_{y in b} |x - y|`` over finite sets."""
    return float(nearest_distances(a, b).max())


def hausdorff(a, b) -> float:
    return max(directed_distance(a, b), directed_distance(b, a))
