"""Unsupervised shortlisting: PCA embedding plus density clustering.

Stands in for the usual manifold-embedding-plus-hierarchical-density
pipeline: principal components keep the implementation inspectable and
DBSCAN keeps the "no preset cluster count" property. The shortlist rule
picks the cluster whose members average the most commercial waits.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from ..geofeatures import FEATURE_NAMES
from .matrix import FeatureMatrix

NOISE = -1
_UNSEEN = -2

COMMERCIAL_WAITS_COL = FEATURE_NAMES.index("total_commercial_waits")


@dataclass(frozen=True)
class PcaResult:
    components: np.ndarray      # (dims, n_features), rows are unit vectors
    mean: np.ndarray            # (n_features,)
    eigenvalues: np.ndarray     # (dims,), descending
    projected: np.ndarray       # (n, dims)


def pca(rows: np.ndarray, dims: int) -> PcaResult:
    """Eigendecomposition of the covariance; component signs are fixed so
    the largest-magnitude loading is positive (determinism)."""
    x = np.asarray(rows, dtype=np.float64)
    if dims < 1 or dims > x.shape[1]:
        raise ValueError(f"dims must lie in [1, {x.shape[1]}]")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / x.shape[0]
    eigvals, eigvecs = np.linalg.eigh(cov)      # ascending
    order = np.argsort(eigvals)[::-1][:dims]
    comps = eigvecs[:, order].T
    for i in range(comps.shape[0]):
        pivot = np.argmax(np.abs(comps[i]))
        if comps[i, pivot] < 0:
            comps[i] = -comps[i]
    return PcaResult(components=comps, mean=mean,
                     eigenvalues=eigvals[order],
                     projected=centered @ comps.T)


def _neighbors(points: np.ndarray, i: int, eps: float) -> np.ndarray:
    d2 = np.sum((points - points[i]) ** 2, axis=1)
    return np.flatnonzero(d2 <= eps * eps)


def dbscan(points: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """Classical density-reachability labels; -1 marks noise.

    Cluster ids are assigned in input order, so the labeling is a pure
    function of the point sequence.
    """
    pts = np.asarray(points, dtype=np.float64)
    if eps <= 0 or min_pts < 1:
        raise ValueError("eps must be positive and min_pts >= 1")
    n = pts.shape[0]
    labels = np.full(n, _UNSEEN, dtype=np.int64)
    cluster = 0
    for i in range(n):
        if labels[i] != _UNSEEN:
            continue
        seeds = _neighbors(pts, i, eps)
        if seeds.size < min_pts:
            labels[i] = NOISE
            continue
        labels[i] = cluster
        queue = deque(int(j) for j in seeds)
        while queue:
            j = queue.popleft()
            if labels[j] == NOISE:
                labels[j] = cluster         # border point, not core
            if labels[j] != _UNSEEN:
                continue
            labels[j] = cluster
            j_neigh = _neighbors(pts, j, eps)
            if j_neigh.size >= min_pts:
                queue.extend(int(m) for m in j_neigh)
        cluster += 1
    return labels


def k_distance_eps(points: np.ndarray, k: int = 4,
                   quantile: float = 0.99) -> float:
    """Radius heuristic: a high quantile of the k-th nearest distances.

    Reading near the top of the sorted k-distance curve keeps fringe
    points attached to their cluster instead of flagging them as noise.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if n <= k:
        raise ValueError(f"need more than {k} points")
    kth = np.empty(n)
    for i in range(n):
        d2 = np.sum((pts - pts[i]) ** 2, axis=1)
        d2.sort()
        kth[i] = np.sqrt(d2[k])             # d2[0] is the point itself
    eps = float(np.quantile(kth, quantile))
    return eps if eps > 0 else 1e-12


def shortlist_clusters(matrix: FeatureMatrix, pca_dims: int = 2,
                       dbscan_eps: float | None = None,
                       min_pts: int = 5) -> np.ndarray:
    """Cluster labels over the PCA embedding of a standardized matrix.

    With ``dbscan_eps`` unset the k-distance heuristic picks the radius.
    """
    embedding = pca(matrix.rows, pca_dims).projected
    if dbscan_eps is None:
        dbscan_eps = k_distance_eps(embedding, k=min(min_pts, len(matrix) - 1))
    return dbscan(embedding, dbscan_eps, min_pts)


def select_delivery_cluster(matrix: FeatureMatrix,
                            labels: np.ndarray) -> int | None:
    """The cluster whose trips average the most commercial waits.

    Uses the raw (unstandardized) commercial-waits column of ``matrix``;
    returns None when everything is noise.
    """
    best, best_mean = None, -np.inf
    for cluster in np.unique(labels):
        if cluster == NOISE:
            continue
        mean = float(matrix.rows[labels == cluster,
                                 COMMERCIAL_WAITS_COL].mean())
        if mean > best_mean:
            best, best_mean = int(cluster), mean
    return best
