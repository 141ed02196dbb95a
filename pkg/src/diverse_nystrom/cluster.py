"""Kernel k-means on Nystrom features and normalised mutual information."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .kernel import sqdist
from .nystrom import NystromFactor


@dataclass(frozen=True)
class ClusterResult:
    assignments: np.ndarray
    inertia: float
    nmi_vs_truth: float | None = None

    def with_truth(self, truth) -> "ClusterResult":
        return ClusterResult(self.assignments, self.inertia, nmi(self.assignments, truth))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "assignment"])
            for i, a in enumerate(self.assignments):
                w.writerow([i, int(a)])


def nystrom_features(factor: NystromFactor, s: int) -> np.ndarray:
    """Rank-``s`` embedding ``U_s S_s`` from the SVD of ``F = K_C R^{-1}``.

    The Gram matrix of the embedding is the best rank-``s`` part of ``F F^T``.
    """
    if not 1 <= s <= factor.k:
        raise ValueError(f"s must be in [1, {factor.k}], got {s}")
    U, S, _ = np.linalg.svd(factor.features(), full_matrices=False)
    return U[:, :s] * S[:s]


def _plusplus(X, s, rng):
    n = X.shape[0]
    centers = np.empty((s, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = sqdist(X, centers[:1]).ravel()
    for j in range(1, s):
        total = d2.sum()
        i = rng.choice(n, p=d2 / total) if total > 0 else rng.integers(n)
        centers[j] = X[i]
        d2 = np.minimum(d2, sqdist(X, centers[j:j + 1]).ravel())
    return centers


def lloyd(X: np.ndarray, centers: np.ndarray, max_iter: int = 300):
    """Lloyd iterations from the given centres.

    Returns ``(assignments, inertia, inertia_history)``.  A cluster that
    loses all its points is re-seeded at the point farthest from its centre.
    """
    s = centers.shape[0]
    centers = centers.copy()
    history = []
    labels = None
    for _ in range(max_iter):
        D = sqdist(X, centers)
        new = np.argmin(D, axis=1)
        dist = D[np.arange(X.shape[0]), new]
        history.append(float(dist.sum()))
        counts = np.bincount(new, minlength=s)
        for j in np.flatnonzero(counts == 0):
            far = int(np.argmax(dist))
            new[far] = j
            dist[far] = 0.0
            counts = np.bincount(new, minlength=s)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(s):
            centers[j] = X[labels == j].mean(axis=0)
    D = sqdist(X, centers)
    inertia = float(D[np.arange(X.shape[0]), labels].sum())
    return labels, inertia, history


def kmeans(features: np.ndarray, s: int, restarts: int = 10, max_iter: int = 300,
           seed=None) -> ClusterResult:
    """Lloyd's algorithm with k-means++ seeding; best inertia over ``restarts``."""
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if not 1 <= s <= n:
        raise ValueError(f"cannot form {s} clusters from {n} points")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        labels, inertia, _ = lloyd(X, _plusplus(X, s, rng), max_iter)
        if best is None or inertia < best[1]:
            best = (labels, inertia)
    return ClusterResult(best[0].astype(np.int64), best[1])


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def nmi(assignments, truth) -> float:
    """Mutual information divided by ``sqrt(H(A) H(B))``."""
    a = np.unique(np.asarray(assignments), return_inverse=True)[1].ravel()
    b = np.unique(np.asarray(truth), return_inverse=True)[1].ravel()
    if a.size != b.size:
        raise ValueError("partitions have different lengths")
    table = np.zeros((a.max() + 1, b.max() + 1))
    np.add.at(table, (a, b), 1.0)
    ha, hb = _entropy(table.sum(axis=1)), _entropy(table.sum(axis=0))
    if ha == 0.0 or hb == 0.0:
        return 1.0 if ha == hb else 0.0
    n = a.size
    nz = table > 0
    outer = np.outer(table.sum(axis=1), table.sum(axis=0))
    mi = float(np.sum(table[nz] / n * np.log(table[nz] * n / outer[nz])))
    return float(np.clip(mi / np.sqrt(ha * hb), 0.0, 1.0))
