"""Per-channel k-means codebooks and nearest-centroid quantization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CardinalityError, DimensionError

_CHUNK = 4096


@dataclass(frozen=True, eq=False)
class Codebook:
    centroids: np.ndarray  # (d_k, dim)
    channel: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.centroids.shape[0]

    @property
    def dimension(self) -> int:
        return self.centroids.shape[1]


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    # explicit differences keep equidistant ties exact, unlike the expanded-norm trick
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def _assign(X: np.ndarray, C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    labels = np.empty(len(X), dtype=np.int64)
    best = np.empty(len(X))
    step = max(1, _CHUNK // max(1, len(C)))
    for s in range(0, len(X), step):
        d = _sq_dists(X[s : s + step], C)
        labels[s : s + step] = np.argmin(d, axis=1)
        best[s : s + step] = d[np.arange(len(d)), labels[s : s + step]]
    return labels, best


def _kmeans_pp(X: np.ndarray, k: int, rng) -> np.ndarray:
    centers = [X[rng.integers(len(X))]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            # fewer distinct points than k: fall back to uniform choice
            idx = int(rng.integers(len(X)))
        else:
            idx = int(rng.choice(len(X), p=d2 / total))
        centers.append(X[idx])
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    return np.array(centers, dtype=np.float64)


def fit_codebook(vectors, size: int, seed: int = 0, max_iters: int = 100, *, channel: int = 0) -> Codebook:
    """Lloyd's k-means from k-means++ seeds.

    Stops at ``max_iters`` or when assignments stop changing. Clusters that
    go empty are re-seeded at the point farthest from its current centroid.
    ``meta["labels"]`` holds the assignment under the returned centroids and
    ``meta["distortion"]`` the per-iteration sum of squared distances.
    """
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError("vectors must be a 2D array")
    if size < 1 or len(X) < size:
        raise CardinalityError(f"need at least {size} vectors for {size} centroids, got {len(X)}")
    rng = np.random.default_rng(seed)
    C = _kmeans_pp(X, size, rng)
    labels, d = _assign(X, C)
    distortion = [float(d.sum())]
    iters = 0
    for iters in range(1, max_iters + 1):
        counts = np.bincount(labels, minlength=size)
        sums = np.zeros_like(C)
        np.add.at(sums, labels, X)
        nonempty = counts > 0
        C = C.copy()
        C[nonempty] = sums[nonempty] / counts[nonempty, None]
        taken = set()
        for j in np.flatnonzero(~nonempty):
            for far in np.argsort(-d, kind="stable"):
                if far not in taken:
                    taken.add(int(far))
                    C[j] = X[far]
                    break
        new_labels, d = _assign(X, C)
        distortion.append(float(d.sum()))
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
    meta = {"seed": seed, "iterations": iters, "distortion": distortion, "labels": labels}
    return Codebook(C, channel, meta)


def quantize(codebook: Codebook, vectors) -> np.ndarray | int:
    """Index of the nearest centroid; ties go to the lowest index.

    A single vector gives an int, a 2D array gives an index array.
    """
    X = np.asarray(vectors, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != codebook.dimension:
        raise DimensionError(f"vector dimension {X.shape[1]} != codebook dimension {codebook.dimension}")
    labels, _ = _assign(X, codebook.centroids)
    return int(labels[0]) if single else labels
