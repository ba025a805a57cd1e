"""Deterministic, seedable K-Means and DBSCAN primitives.

Both are written for metric desk-scale data: K-Means uses k-means++ seeding
driven by an explicit RNG seed, DBSCAN finds neighbors through a uniform
spatial grid with cell size eps. All tie-breaks resolve to the lowest index
so results are reproducible for a fixed input.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

NOISE = -1


@dataclass
class KMeansResult:
    labels: np.ndarray          # (m,) cluster index per row
    centroids: np.ndarray       # (k, d)
    sse: float                  # within-cluster sum of squared errors
    sse_history: tuple          # recorded after each Lloyd iteration
    iterations_run: int
    seed_indices: tuple         # rows chosen by the seeding stage

    def indicator(self) -> np.ndarray:
        """One-hot (m, k) indication matrix of the assignment."""
        m = self.labels.shape[0]
        k = self.centroids.shape[0]
        out = np.zeros((m, k), dtype=np.int64)
        out[np.arange(m), self.labels] = 1
        return out

    @property
    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.centroids.shape[0])


@dataclass
class DbscanResult:
    cluster_ids: np.ndarray   # (m,) cluster index, NOISE (-1) for noise
    cluster_sizes: np.ndarray  # per-cluster member counts

    @property
    def num_clusters(self) -> int:
        return self.cluster_sizes.shape[0]


def _squared_distances(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, (m, k)."""
    d2 = (
        np.einsum("ij,ij->i", x, x)[:, None]
        - 2.0 * (x @ c.T)
        + np.einsum("ij,ij->i", c, c)[None, :]
    )
    np.maximum(d2, 0.0, out=d2)
    return d2


def _kmeans_pp_seed(data: np.ndarray, k: int, rng: np.random.Generator) -> list[int]:
    m = data.shape[0]
    chosen = [int(rng.integers(m))]
    d2 = np.sum((data - data[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # all remaining mass sits on already-chosen points
            idx = int(rng.integers(m))
        else:
            idx = int(rng.choice(m, p=d2 / total))
        chosen.append(idx)
        d2 = np.minimum(d2, np.sum((data - data[idx]) ** 2, axis=1))
    return chosen


def kmeans(
    data: np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = 100,
    init_indices: Optional[Sequence[int]] = None,
) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding.

    Converges when assignments stabilize or ``max_iter`` is reached. Clusters
    that empty out are re-seeded to the point farthest from its current
    centroid, so the requested cluster count is always honored. Output is
    deterministic for fixed ``(data, k, seed)``; ``init_indices`` overrides
    the seeding stage (used by the permutation-equivariance tests).
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] < 1:
        raise ValueError("data must be (m, d) with d >= 1")
    if not np.all(np.isfinite(data)):
        raise ValueError("non-finite input")
    m = data.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if m < k:
        raise ValueError(f"insufficient points: m={m} < k={k}")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")

    if init_indices is not None:
        seeds = [int(i) for i in init_indices]
        if len(seeds) != k:
            raise ValueError("init_indices length must equal k")
    else:
        seeds = _kmeans_pp_seed(data, k, np.random.default_rng(seed))
    centroids = data[seeds].copy()

    labels = np.full(m, -1, dtype=np.int64)
    sse_history: list[float] = []
    iterations = 0
    for _ in range(max_iter):
        d2 = _squared_distances(data, centroids)
        new_labels = np.argmin(d2, axis=1)  # ties -> lowest cluster index

        # farthest-point re-seeding keeps every cluster non-empty; singleton
        # clusters are protected so a move never re-empties one
        counts = np.bincount(new_labels, minlength=k)
        for empty in np.flatnonzero(counts == 0):
            dist_to_own = d2[np.arange(m), new_labels].copy()
            dist_to_own[counts[new_labels] <= 1] = -1.0
            far = int(np.argmax(dist_to_own))
            counts[new_labels[far]] -= 1
            new_labels[far] = empty
            counts[empty] += 1
            d2[far, :] = np.inf
            d2[far, empty] = 0.0

        converged = np.array_equal(new_labels, labels)
        labels = new_labels
        for j in range(k):
            centroids[j] = data[labels == j].mean(axis=0)
        iterations += 1
        sse = float(np.sum((data - centroids[labels]) ** 2))
        sse_history.append(sse)
        if converged:
            break

    return KMeansResult(
        labels=labels,
        centroids=centroids,
        sse=sse_history[-1],
        sse_history=tuple(sse_history),
        iterations_run=iterations,
        seed_indices=tuple(seeds),
    )


class _EpsGrid:
    """Uniform spatial hash with cell size eps for radius queries."""

    def __init__(self, points: np.ndarray, eps: float):
        self.points = points
        self.eps = eps
        self.eps2 = eps * eps
        self.cells: dict[tuple, np.ndarray] = {}
        keys = np.floor(points / eps).astype(np.int64)
        order = np.arange(points.shape[0])
        flat = {}
        for i in order:
            key = tuple(keys[i])
            flat.setdefault(key, []).append(i)
        for key, idxs in flat.items():
            self.cells[key] = np.asarray(idxs, dtype=np.int64)
        self._keys = keys

    def neighbors(self, i: int) -> np.ndarray:
        """Indices (ascending, including i) within eps of point i."""
        ki, kj, kk = self._keys[i]
        candidates = []
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                for dk in (-1, 0, 1):
                    cell = self.cells.get((ki + di, kj + dj, kk + dk))
                    if cell is not None:
                        candidates.append(cell)
        cand = np.concatenate(candidates)
        diff = self.points[cand] - self.points[i]
        close = cand[np.einsum("ij,ij->i", diff, diff) <= self.eps2]
        close.sort()
        return close


def dbscan(positions: np.ndarray, eps: float, min_pts: int) -> DbscanResult:
    """Density-based clustering over 3-d positions.

    A point is core when its eps-neighborhood (self included) has at least
    ``min_pts`` members. Expansion is breadth-first in ascending index order,
    so border points shared between clusters join the first-discovered one.
    """
    positions = np.asarray(positions, dtype=np.float64)
    if positions.ndim != 2 or positions.shape[1] != 3:
        raise ValueError("positions must be (m, 3)")
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")

    m = positions.shape[0]
    grid = _EpsGrid(positions, eps)
    cluster_ids = np.full(m, NOISE, dtype=np.int64)
    visited = np.zeros(m, dtype=bool)
    current = 0
    for i in range(m):
        if visited[i]:
            continue
        visited[i] = True
        neigh = grid.neighbors(i)
        if neigh.shape[0] < min_pts:
            continue  # noise unless later reached from a core point
        cluster_ids[i] = current
        queue = [j for j in neigh if j != i]
        qi = 0
        while qi < len(queue):
            j = queue[qi]
            qi += 1
            if cluster_ids[j] == NOISE:
                cluster_ids[j] = current
            if visited[j]:
                continue
            visited[j] = True
            jn = grid.neighbors(j)
            if jn.shape[0] >= min_pts:
                queue.extend(int(x) for x in jn)
        current += 1

    sizes = (
        np.bincount(cluster_ids[cluster_ids >= 0], minlength=current)
        if current > 0
        else np.zeros(0, dtype=np.int64)
    )
    return DbscanResult(cluster_ids=cluster_ids, cluster_sizes=sizes.astype(np.int64))
