"""Dimensionality reduction and cluster-count selection.

PCA keeps the minimal component count that reaches the variance target, and
K-means is run across a candidate range of cluster counts with the mean
silhouette coefficient picking the winner. Everything is seeded and pure so a
(points, config) pair always reproduces the same result.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import PipelineConfig
from .distances import pairwise_distances
from .errors import DegenerateDataError, PreconditionError

_VARIANCE_EPS = 1e-12


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray  # (d,)
    components: np.ndarray  # (m, d), rows orthonormal
    explained_variance_ratio: np.ndarray  # (m,)

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    def transform(self, vectors) -> np.ndarray:
        x = np.atleast_2d(np.asarray(vectors, dtype=float))
        return (x - self.mean) @ self.components.T


def fit_pca(vectors, variance_target: float) -> PcaModel:
    """Fit PCA retaining the minimal component count reaching the target.

    Sign convention: each component's largest-magnitude entry is positive,
    which removes the eigenvector sign ambiguity.
    """
    x = np.asarray(vectors, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise PreconditionError("need at least 2 equal-dimension vectors")
    if not (0.0 < variance_target <= 1.0):
        raise PreconditionError("variance_target must be in (0, 1]")

    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (x.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    eigvecs = eigvecs[:, order].T  # rows are components

    total = eigvals.sum()
    if total <= _VARIANCE_EPS:
        raise DegenerateDataError("all points identical: no variance to explain")

    ratios = eigvals / total
    cumulative = np.cumsum(ratios)
    m = int(np.searchsorted(cumulative, variance_target - _VARIANCE_EPS) + 1)

    components = eigvecs[:m].copy()
    for row in components:
        anchor = np.argmax(np.abs(row))
        if row[anchor] < 0:
            row *= -1.0
    return PcaModel(mean=mean, components=components, explained_variance_ratio=ratios[:m].copy())


def _kmeans_plusplus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    closest_sq = ((points - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = closest_sq.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=closest_sq / total))
        centers[c] = points[idx]
        d = ((points - centers[c]) ** 2).sum(axis=1)
        closest_sq = np.minimum(closest_sq, d)
    return centers


def _lloyd(points: np.ndarray, centers: np.ndarray, max_iters: int, tol: float):
    k = len(centers)
    for _ in range(max_iters):
        d = pairwise_distances(points, centers)
        assign = d.argmin(axis=1)
        new_centers = centers.copy()
        for c in range(k):
            members = points[assign == c]
            if len(members):
                new_centers[c] = members.mean(axis=0)
        # Repair empty clusters by reseeding to the farthest point.
        empty = [c for c in range(k) if not (assign == c).any()]
        if empty:
            dist_to_own = d[np.arange(len(points)), assign]
            order = np.argsort(dist_to_own)[::-1]
            for c, pi in zip(empty, order):
                new_centers[c] = points[int(pi)]
        shift = np.linalg.norm(new_centers - centers, axis=1).max()
        centers = new_centers
        if shift < tol and not empty:
            break
    d = pairwise_distances(points, centers)
    assign = d.argmin(axis=1)
    inertia = float((d[np.arange(len(points)), assign] ** 2).sum())
    return assign, centers, inertia


def kmeans(
    points,
    k: int,
    seed: int,
    n_init: int = 10,
    max_iters: int = 300,
    tol: float = 1e-6,
):
    """Best-of-``n_init`` seeded K-means++ runs; returns (assignments, centroids, inertia)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if not (1 <= k <= len(pts)):
        raise PreconditionError(f"k={k} outside [1, {len(pts)}]")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        centers = _kmeans_plusplus(pts, k, rng)
        assign, centers, inertia = _lloyd(pts, centers, max_iters, tol)
        if best is None or inertia < best[2]:
            best = (assign, centers, inertia)
    return best


def mean_silhouette(points, assignments) -> float:
    """Mean of (b - a) / max(a, b); singletons and all-zero distances score 0."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    assign = np.asarray(assignments)
    labels = np.unique(assign)
    if len(labels) < 2:
        raise PreconditionError("silhouette needs at least 2 clusters")

    d = pairwise_distances(pts, pts)
    scores = np.zeros(len(pts))
    members = {lab: np.nonzero(assign == lab)[0] for lab in labels}
    for i in range(len(pts)):
        own = members[assign[i]]
        if len(own) == 1:
            scores[i] = 0.0
            continue
        a = d[i, own[own != i]].mean()
        b = min(d[i, members[lab]].mean() for lab in labels if lab != assign[i])
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0 else (b - a) / denom
    return float(scores.mean())


@dataclass(frozen=True)
class ClusteringResult:
    k: int
    assignments: np.ndarray
    centroids: np.ndarray
    silhouette_by_k: dict[int, float]
    inertia: float

    @property
    def mean_silhouette(self) -> float:
        return self.silhouette_by_k[self.k]


def select_k_and_cluster(points, config: PipelineConfig) -> ClusteringResult:
    """Cluster at every k in range and keep the best mean silhouette (ties: smaller k)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if len(pts) < config.k_min + 1:
        raise PreconditionError(
            f"need at least k_min+1={config.k_min + 1} points, got {len(pts)}"
        )
    k_hi = min(config.k_max, len(pts) - 1)
    silhouettes: dict[int, float] = {}
    runs = {}
    for k in range(config.k_min, k_hi + 1):
        assign, centers, inertia = kmeans(
            pts, k, seed=config.seed, n_init=config.n_init,
            max_iters=config.max_iters, tol=config.tol,
        )
        silhouettes[k] = mean_silhouette(pts, assign)
        runs[k] = (assign, centers, inertia)
    best_k = max(sorted(silhouettes), key=lambda k: silhouettes[k])
    assign, centers, inertia = runs[best_k]
    return ClusteringResult(
        k=best_k,
        assignments=assign,
        centroids=centers,
        silhouette_by_k=silhouettes,
        inertia=inertia,
    )
