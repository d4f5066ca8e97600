"""Fixed-radius neighbor queries over a static point set.

The kernel has compact support, so every matrix row touches only points
within a known radius.  A uniform grid of cubical cells with edge equal to
the query radius answers each query by scanning the 3^d surrounding cells,
which is O(neighbors) per query for quasi-uniform clouds — and is simple
enough to audit against the O(n^2) direct scan.

Queries return indices sorted ascending.  Assembly sums contributions in
index order, so results are bit-identical whether rows are built from this
index or from a masked full distance matrix.
"""

from __future__ import annotations

import numpy as np

__all__ = ["NeighborIndex"]


class NeighborIndex:
    """Uniform-grid spatial hash for fixed-radius neighbor queries.

    Parameters
    ----------
    points : (n, d) array
        The point set to index.
    radius : float
        Query radius; pairs at distance exactly ``radius`` are included.
    """

    def __init__(self, points: np.ndarray, radius: float):
        points = np.ascontiguousarray(points, dtype=float)
        if points.ndim != 2:
            raise ValueError("points must be a 2-d array")
        if radius <= 0.0:
            raise ValueError("radius must be positive")
        self.points = points
        self.radius = float(radius)
        self._r2 = self.radius * self.radius
        n, d = points.shape
        self._origin = points.min(axis=0)
        self._cell = self.radius
        keys = np.floor((points - self._origin) / self._cell).astype(np.int64)
        self._buckets: dict[tuple, np.ndarray] = {}
        order = np.lexsort(keys.T[::-1])
        sk = keys[order]
        starts = np.flatnonzero(np.any(np.diff(sk, axis=0) != 0, axis=1)) + 1
        bounds = np.concatenate([[0], starts, [n]])
        for s, e in zip(bounds[:-1], bounds[1:]):
            grp = order[s:e]
            grp.sort()
            self._buckets[tuple(sk[s])] = grp
        self._keys = keys
        # precomputed 3^d cell-offset block
        self._offsets = np.stack(np.meshgrid(
            *([np.arange(-1, 2)] * d), indexing="ij"
        ), axis=-1).reshape(-1, d)

    def _candidates(self, x: np.ndarray) -> np.ndarray:
        base = np.floor((x - self._origin) / self._cell).astype(np.int64)
        found = [self._buckets.get(tuple(base + off)) for off in self._offsets]
        found = [g for g in found if g is not None]
        if not found:
            return np.empty(0, dtype=np.intp)
        cand = np.concatenate(found)
        cand.sort()
        return cand

    def query_point(self, x: np.ndarray) -> np.ndarray:
        """Indices (ascending) of points within ``radius`` of ``x``."""
        x = np.asarray(x, dtype=float).ravel()
        cand = self._candidates(x)
        if cand.size == 0:
            return cand
        diff = self.points[cand] - x
        keep = np.einsum("ij,ij->i", diff, diff) <= self._r2
        return cand[keep]

    def query_self(self) -> list[np.ndarray]:
        """Neighbor list for every indexed point (each includes itself)."""
        return [self.query_point(p) for p in self.points]

    def query_brute(self, x: np.ndarray) -> np.ndarray:
        """Direct O(n) scan; oracle for query_point."""
        x = np.asarray(x, dtype=float).ravel()
        diff = self.points - x
        keep = np.einsum("ij,ij->i", diff, diff) <= self._r2
        return np.flatnonzero(keep).astype(np.intp)
