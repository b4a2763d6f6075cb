"""Set distances between embedded corpora: Hausdorff and 1-Wasserstein.

Wasserstein between equal-size uniform point sets reduces to a minimum-cost
perfect matching, solved exactly here with a shortest-augmenting-path
assignment solver. Unequal sizes are handled by seeded subsampling of the
larger set so every individual computation stays exact and reproducible.
"""

from __future__ import annotations

import numpy as np

from .errors import PreconditionError

ASSIGNMENT_LIMIT = 256
RESAMPLES = 10


def _as_points(name: str, points) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.size == 0:
        raise PreconditionError(f"{name} must be non-empty")
    if arr.ndim != 2:
        raise PreconditionError(f"{name} must be a 2-D array of points")
    return arr


def pairwise_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)


def hausdorff(a, b) -> float:
    """max over both directions of the farthest nearest-neighbor distance."""
    pa = _as_points("A", a)
    pb = _as_points("B", b)
    if pa.shape[1] != pb.shape[1]:
        raise PreconditionError("point sets must share a dimension")
    d = pairwise_distances(pa, pb)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def min_cost_assignment(cost: np.ndarray) -> np.ndarray:
    """Exact minimum-cost assignment on a square cost matrix.

    Returns the column index matched to each row. Shortest augmenting path
    with row/column potentials, O(n^3) with vectorized column scans.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise PreconditionError("cost matrix must be square")
    n = cost.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    match = np.zeros(n + 1, dtype=np.intp)  # column -> row, 1-based; 0 = free
    way = np.zeros(n + 1, dtype=np.intp)

    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        used[0] = True
        while True:
            i0 = match[j0]
            free = ~used[1:]
            reduced = cost[i0 - 1, :] - u[i0] - v[1:]
            better = free & (reduced < minv[1:])
            if better.any():
                view = minv[1:]
                view[better] = reduced[better]
                wview = way[1:]
                wview[better] = j0
            free_idx = np.nonzero(free)[0]
            pick = free_idx[np.argmin(minv[1:][free_idx])]
            j1 = int(pick) + 1
            delta = minv[j1]
            u[match[used]] += delta
            v[used] -= delta
            view = minv[1:]
            view[free] -= delta
            used[j1] = True
            j0 = j1
            if match[j0] == 0:
                break
        while j0 != 0:
            j_prev = way[j0]
            match[j0] = match[j_prev]
            j0 = j_prev

    cols = np.zeros(n, dtype=np.intp)
    for j in range(1, n + 1):
        cols[match[j] - 1] = j - 1
    return cols


def _exact_wasserstein(a: np.ndarray, b: np.ndarray) -> float:
    d = pairwise_distances(a, b)
    cols = min_cost_assignment(d)
    return float(d[np.arange(len(a)), cols].mean())


def wasserstein(
    a,
    b,
    seed: int = 0,
    assignment_limit: int = ASSIGNMENT_LIMIT,
    resamples: int = RESAMPLES,
) -> float:
    """Uniform-weight 1-Wasserstein distance between two point sets.

    Equal sizes within ``assignment_limit`` are computed exactly. Otherwise
    the larger set (or both, above the limit) is uniformly subsampled to the
    common size with a seeded generator and the exact value is averaged over
    ``resamples`` draws.
    """
    pa = _as_points("A", a)
    pb = _as_points("B", b)
    if pa.shape[1] != pb.shape[1]:
        raise PreconditionError("point sets must share a dimension")

    target = min(len(pa), len(pb), assignment_limit)
    if len(pa) == len(pb) == target:
        return _exact_wasserstein(pa, pb)

    rng = np.random.default_rng(seed)
    values = []
    for _ in range(resamples):
        sa = pa if len(pa) == target else pa[rng.choice(len(pa), size=target, replace=False)]
        sb = pb if len(pb) == target else pb[rng.choice(len(pb), size=target, replace=False)]
        values.append(_exact_wasserstein(sa, sb))
    return float(np.mean(values))
