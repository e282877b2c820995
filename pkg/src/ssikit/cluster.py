"""K-means baseline: Lloyd iterations from a seeded k-means++ start."""

import csv
from dataclasses import dataclass, field

import numpy as np

from ._io import atomic_write
from .errors import ValidationError
from .synth import make_rng


@dataclass
class ClusterResult:
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    iterations: int
    inertia_history: list = field(default_factory=list)


def _sq_dist(X, centroids):
    return ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def kmeans_plusplus(X, k, rng):
    n = len(X)
    chosen = [int(rng.integers(n))]
    closest = ((X - X[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        else:
            # every point coincides with a centroid; take any unused index
            unused = np.setdiff1d(np.arange(n), chosen)
            idx = int(unused[rng.integers(len(unused))])
        chosen.append(idx)
        closest = np.minimum(closest, ((X - X[idx]) ** 2).sum(axis=1))
    return X[chosen].copy()


def kmeans(X, k=4, seed=0, max_iter=300):
    """
    Cluster attribute rows with Lloyd's algorithm.

    Initial centroids come from k-means++ driven by the portable seeded
    generator of :func:`ssikit.synth.make_rng`, so a seed fixes the result.
    Iteration stops when no label changes or after ``max_iter`` rounds. A
    cluster that empties is re-seeded with the point farthest from its
    current centroid.
    """
    values = np.asarray(getattr(X, "values", X), dtype=float)
    if values.ndim != 2:
        raise ValidationError("expected a 2-D matrix")
    n = len(values)
    if k < 1:
        raise ValidationError("k must be at least 1")
    if k > n:
        raise ValidationError(f"k={k} exceeds the number of points n={n}")
    if max_iter < 1:
        raise ValidationError("max_iter must be at least 1")

    rng = make_rng(seed)
    centroids = kmeans_plusplus(values, k, rng)
    labels = np.full(n, -1)
    history = []
    iterations = 0
    for iterations in range(1, max_iter + 1):
        d = _sq_dist(values, centroids)
        new_labels = d.argmin(axis=1)
        point_d = d[np.arange(n), new_labels]
        history.append(float(point_d.sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = labels == j
            if members.any():
                centroids[j] = values[members].mean(axis=0)
            else:
                far = int(point_d.argmax())
                centroids[j] = values[far]
                labels[far] = j
                point_d[far] = 0.0
    inertia = float(((values - centroids[labels]) ** 2).sum())
    return ClusterResult(labels, centroids, inertia, iterations, history)


def write_clusters(path, block_ids, result):
    with atomic_write(path, newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("block_id", "cluster"))
        for block_id, label in zip(block_ids, result.labels):
            writer.writerow((block_id, int(label)))
