"""Exact m-nearest-neighbor search with deterministic tie-breaking.

Built on a k-d tree (O(m n log n) in the typical case). Distance ties are
broken by smaller observation index; rows whose neighbor cutoff is ambiguous
in the fast path fall back to an exact ball query.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from selabel.errors import InsufficientDataError


def nearest_neighbors(points: np.ndarray, m: int) -> np.ndarray:
    """Indices of the m nearest neighbors (self excluded) of every row.

    Returns an (n, m_eff) integer array with m_eff = min(m, n - 1), each row
    sorted by (squared distance, index).
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    n = points.shape[0]
    if n < 2:
        raise InsufficientDataError("need at least 2 points for neighbor search")
    if m < 1:
        raise ValueError("m must be positive")
    m_eff = min(m, n - 1)

    tree = cKDTree(points)
    k = min(n, m_eff + 2)
    dist, idx = tree.query(points, k=k)
    dist = np.atleast_2d(dist)
    idx = np.atleast_2d(idx)

    # Drop self-matches (distance ties can put self anywhere in the returned
    # list, so match on index, not position).
    self_mask = idx == np.arange(n)[:, None]
    dist = np.where(self_mask, np.inf, dist)

    rows = np.repeat(np.arange(n), k)
    order = np.lexsort((idx.ravel(), dist.ravel(), rows))
    idx_sorted = idx.ravel()[order].reshape(n, k)
    dist_sorted = dist.ravel()[order].reshape(n, k)

    result = idx_sorted[:, :m_eff].copy()

    # Ambiguous rows: the cutoff distance ties with the first excluded
    # candidate (or the fast window was exhausted by self-duplicates).
    if k > m_eff:
        ambiguous = dist_sorted[:, m_eff - 1] >= dist_sorted[:, m_eff]
    else:
        ambiguous = np.zeros(n, dtype=bool)
    ambiguous |= ~np.isfinite(dist_sorted[:, :m_eff]).all(axis=1)

    for i in np.flatnonzero(ambiguous):
        radius = dist_sorted[i, m_eff - 1]
        if not np.isfinite(radius):
            radius = float(np.max(dist_sorted[i][np.isfinite(dist_sorted[i])], initial=0.0))
        candidates = tree.query_ball_point(points[i], radius * (1 + 1e-12) + 1e-300)
        candidates = np.array([c for c in candidates if c != i], dtype=np.intp)
        if candidates.size < m_eff:
            # Radius shy of m_eff distinct neighbors (duplicate points); widen.
            d2_all = np.sum((points - points[i]) ** 2, axis=1)
            d2_all[i] = np.inf
            candidates = np.argsort(d2_all, kind="stable")[: max(4 * m_eff, 16)]
            candidates = candidates[np.isfinite(d2_all[candidates])]
        d2 = np.sum((points[candidates] - points[i]) ** 2, axis=1)
        take = np.lexsort((candidates, d2))[:m_eff]
        result[i] = candidates[take]

    return result
