"""Texton codebook: seeded k-means over filter-response vectors.

The codebook is learned with k-means++ initialization followed by Lloyd
iterations, stopping when the largest center movement drops below 1e-6 or
after 100 iterations. All randomness flows through one seeded generator, so
a (data, seed) pair always yields byte-identical centers. Ties in nearest-
center assignment break toward the lower center index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["TextonCodebook", "train_textons", "assign_textons"]

MOVEMENT_TOL = 1e-6
MAX_ITER = 100


@dataclass(frozen=True)
class TextonCodebook:
    """k cluster centers over filter-response vectors, plus the training seed."""

    centers: np.ndarray  # float64 (k, dim)
    seed: int
    objective_trace: tuple[float, ...] = field(default_factory=tuple, compare=False)

    def __post_init__(self):
        centers = np.ascontiguousarray(self.centers, dtype=np.float64)
        object.__setattr__(self, "centers", centers)
        if centers.ndim != 2 or centers.shape[0] < 1:
            raise ValueError("centers must be a nonempty (k, dim) array")

    @property
    def k(self) -> int:
        return self.centers.shape[0]


def _pairwise_sq_dist(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # ||x - c||^2 expanded; tiny negatives from cancellation are clipped.
    d2 = (
        (points * points).sum(axis=1)[:, None]
        - 2.0 * points @ centers.T
        + (centers * centers).sum(axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]), dtype=np.float64)
    centers[0] = points[int(rng.integers(n))]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # every remaining point coincides with a chosen center
            raise ValueError(
                f"k={k} exceeds the number of distinct sample vectors ({j})"
            )
        idx = int(rng.choice(n, p=d2 / total))
        centers[j] = points[idx]
        np.minimum(d2, ((points - centers[j]) ** 2).sum(axis=1), out=d2)
    return centers


def train_textons(
    responses: np.ndarray,
    k: int = 64,
    seed: int = 0,
    max_samples: int = 100_000,
    max_iter: int = MAX_ITER,
    tol: float = MOVEMENT_TOL,
) -> TextonCodebook:
    """Learn a texton codebook from filter-response vectors.

    Parameters
    ----------
    responses : float array (N, dim)
        One row per pixel. If N exceeds ``max_samples``, a uniform sample
        without replacement (drawn first, from the same seeded generator)
        is used.
    k : int
        Codebook size; requires N >= k.
    seed : int
        Seed for sampling, k-means++ init, and empty-cluster reseeding.

    Returns
    -------
    TextonCodebook
        Centers plus the per-iteration objective trace (sum of squared
        distances of every training point to its nearest center, recorded
        at each assignment step; non-increasing).
    """
    points = np.ascontiguousarray(responses, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("responses must be (N, dim)")
    if points.shape[0] < k:
        raise ValueError(f"need at least k={k} vectors, got {points.shape[0]}")
    rng = np.random.Generator(np.random.PCG64(seed))
    if points.shape[0] > max_samples:
        idx = rng.choice(points.shape[0], size=max_samples, replace=False)
        idx.sort()  # keep row order independent of the draw order
        points = points[idx]

    centers = _kmeans_pp_init(points, k, rng)
    trace: list[float] = []
    for _ in range(max_iter):
        d2 = _pairwise_sq_dist(points, centers)
        labels = d2.argmin(axis=1)
        trace.append(float(d2[np.arange(points.shape[0]), labels].sum()))
        new_centers = centers.copy()
        counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(centers)
        np.add.at(sums, labels, points)
        nonempty = counts > 0
        new_centers[nonempty] = sums[nonempty] / counts[nonempty, None]
        # An empty cluster is reseeded to the point farthest from its
        # nearest center, which guarantees it captures that point next
        # iteration and counts as movement (so we cannot stop here).
        for j in np.flatnonzero(~nonempty):
            nearest = _pairwise_sq_dist(points, new_centers).min(axis=1)
            new_centers[j] = points[int(nearest.argmax())]
        movement = float(np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max())
        centers = new_centers
        if movement < tol:
            break
    return TextonCodebook(centers=centers, seed=seed, objective_trace=tuple(trace))


def assign_textons(responses: np.ndarray, codebook: TextonCodebook) -> np.ndarray:
    """Assign each pixel to its nearest codebook center (squared L2).

    ``responses`` may be (N, dim) or (dim, H, W); the result is (N,) or
    (H, W) int32 accordingly. Ties break toward the lower center index.
    """
    arr = np.asarray(responses, dtype=np.float64)
    image_form = arr.ndim == 3
    if image_form:
        if arr.shape[0] != codebook.centers.shape[1]:
            raise ValueError("response stack dim does not match codebook")
        flat = arr.reshape(arr.shape[0], -1).T
    elif arr.ndim == 2:
        flat = arr
    else:
        raise ValueError("responses must be (N, dim) or (dim, H, W)")
    # Chunk to bound the (N, k) distance matrix for large images.
    out = np.empty(flat.shape[0], dtype=np.int32)
    step = max(1, 2_000_000 // max(1, codebook.k))
    for start in range(0, flat.shape[0], step):
        block = flat[start : start + step]
        out[start : start + step] = _pairwise_sq_dist(block, codebook.centers).argmin(axis=1)
    if image_form:
        return out.reshape(arr.shape[1], arr.shape[2])
    return out
