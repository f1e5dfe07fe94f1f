"""Pareto front bookkeeping and quality metrics.

All objectives are maximized. A point p (weakly) dominates q when p >= q
coordinate-wise; this is the "covers" relation used by the coverage metric.
The strict version additionally requires p != q and is what the filter and
the archive prune with.

Metrics:

* ``hypervolume``: volume of the union of boxes [0, p] for p on the front,
  referenced to the origin. Supported for 2 and 3 objectives: the 2-D case
  is a sort-and-sweep over the staircase, the 3-D case slices along the
  third axis, reusing the 2-D sweep per slab.
* ``coverage``: C(A, B), the fraction of B weakly dominated by some point
  of A. Asymmetric; compare both directions.
* ``spacing``: sample standard deviation of nearest-neighbor (Euclidean)
  distances within the front. 0 means perfectly even spread.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np


def _as_front(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1) if pts.size else pts.reshape(0, 0)
    if pts.ndim != 2:
        raise ValueError(f"expected a (k, n) array of points, got shape {pts.shape}")
    if not np.isfinite(pts).all():
        raise ValueError("front contains non-finite entries")
    return pts


def dominates(p, q) -> bool:
    """Weak domination: every coordinate of p is >= the one in q."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {q.shape}")
    return bool((p >= q).all())


def strictly_dominates(p, q) -> bool:
    """Weak domination with at least one strictly greater coordinate."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    return bool((p >= q).all() and (p > q).any())


def non_dominated_filter(points) -> np.ndarray:
    """Drop strictly dominated points and collapse exact duplicates.

    Keeps the first occurrence of each survivor, in input order.
    """
    pts = _as_front(points)
    k = pts.shape[0]
    keep: list[int] = []
    for i in range(k):
        dominated = False
        for j in range(k):
            if j == i:
                continue
            if (pts[j] >= pts[i]).all() and (pts[j] > pts[i]).any():
                dominated = True
                break
        if dominated:
            continue
        if any((pts[i] == pts[j]).all() for j in keep):
            continue
        keep.append(i)
    return pts[keep]


def _hypervolume_2d(pts: np.ndarray) -> float:
    # staircase sweep: x descending, y strictly ascending after filtering
    order = np.argsort(-pts[:, 0], kind="stable")
    pts = pts[order]
    total = 0.0
    y_prev = 0.0
    for x, y in pts:
        if y > y_prev:
            total += x * (y - y_prev)
            y_prev = y
    return total


def _hypervolume_3d(pts: np.ndarray) -> float:
    order = np.argsort(-pts[:, 2], kind="stable")
    pts = pts[order]
    z_levels = pts[:, 2]
    total = 0.0
    for i in range(pts.shape[0]):
        z_lo = z_levels[i + 1] if i + 1 < pts.shape[0] else 0.0
        depth = z_levels[i] - z_lo
        if depth <= 0.0:
            continue
        slab = non_dominated_filter(pts[: i + 1, :2])
        total += _hypervolume_2d(slab) * depth
    return total


def hypervolume(front) -> float:
    """Origin-referenced hypervolume of a maximization front (2 or 3 axes).

    Dominated and duplicate points are filtered out first, so adding a
    dominated point never changes the result. Coordinates must be
    non-negative; anything below the origin would corrupt the box union.
    """
    pts = _as_front(front)
    if pts.shape[0] == 0:
        return 0.0
    n = pts.shape[1]
    if n not in (2, 3):
        raise ValueError(f"hypervolume supports 2 or 3 objectives, got {n}")
    if (pts < 0.0).any():
        raise ValueError("hypervolume requires non-negative coordinates")
    pts = non_dominated_filter(pts)
    if n == 2:
        return _hypervolume_2d(pts)
    return _hypervolume_3d(pts)


def coverage(a, b) -> float:
    """C(A, B): fraction of points in B weakly dominated by some point in A."""
    A = _as_front(a)
    B = _as_front(b)
    if B.shape[0] == 0:
        raise ValueError("coverage is undefined for an empty second front")
    if A.shape[0] == 0:
        return 0.0
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"objective count mismatch: {A.shape[1]} vs {B.shape[1]}")
    covered = 0
    for q in B:
        if any((p >= q).all() for p in A):
            covered += 1
    return covered / B.shape[0]


def spacing(front) -> float:
    """Schott spacing: std of nearest-neighbor distances, (k - 1) denominator."""
    pts = _as_front(front)
    k = pts.shape[0]
    if k < 2:
        raise ValueError("spacing needs at least two points")
    dists = np.empty(k)
    for i in range(k):
        diff = pts - pts[i]
        d = np.sqrt((diff * diff).sum(axis=1))
        d[i] = np.inf
        dists[i] = d.min()
    mean = dists.mean()
    return float(np.sqrt(((dists - mean) ** 2).sum() / (k - 1)))


class ParetoArchive:
    """Incrementally maintained set of mutually non-dominated points.

    ``insert`` rejects a candidate that is weakly dominated by (or equal
    to) anything already archived, otherwise evicts everything the
    candidate weakly dominates. Each point can carry an opaque payload
    (e.g. which run produced it).
    """

    def __init__(self, n_objectives: int | None = None):
        self.n_objectives = n_objectives
        self._points: list[np.ndarray] = []
        self._payloads: list = []

    def __len__(self) -> int:
        return len(self._points)

    @property
    def points(self) -> np.ndarray:
        if not self._points:
            n = self.n_objectives or 0
            return np.empty((0, n))
        return np.stack(self._points)

    @property
    def payloads(self) -> list:
        return list(self._payloads)

    def insert(self, point, payload=None) -> bool:
        p = np.asarray(point, dtype=np.float64).reshape(-1)
        if not np.isfinite(p).all():
            raise ValueError("point contains non-finite entries")
        if self.n_objectives is None:
            self.n_objectives = p.shape[0]
        elif p.shape[0] != self.n_objectives:
            raise ValueError(
                f"expected {self.n_objectives} objectives, got {p.shape[0]}"
            )
        for q in self._points:
            if (q >= p).all():
                return False
        kept = [
            (q, pl)
            for q, pl in zip(self._points, self._payloads)
            if not (p >= q).all()
        ]
        self._points = [q for q, _ in kept]
        self._payloads = [pl for _, pl in kept]
        self._points.append(p)
        self._payloads.append(payload)
        return True
