"""Lloyd's k-means: the initial codebook that balancing post-processes.

Everything is deterministic for a fixed seed. Ties break toward the lowest
index throughout, and per-point assignment is a pure function, so vectorized
execution matches sequential execution exactly.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import VectorSet
from .distances import sqdist_to_centroids

DEFAULT_REL_TOL = 1e-4
DEFAULT_MAX_ITERS = 100

INIT_RANDOM_POINTS = "random-points"
INIT_KMEANS_PP = "kmeans-plus-plus"


@dataclass(eq=False)
class Centroids:
    """k cluster centers, one per row. Values must be finite."""

    points: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.points)
        if pts.ndim != 2:
            raise ValueError("centroids must be a 2-d matrix")
        if pts.size and not np.isfinite(pts).all():
            raise ValueError("centroids contain non-finite values")
        self.points = pts

    @property
    def k(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(eq=False)
class Assignment:
    """Per-point cell ids plus exact per-cell population counts."""

    cell_of: np.ndarray
    counts: np.ndarray

    def __post_init__(self) -> None:
        self.cell_of = np.asarray(self.cell_of, dtype=np.int64)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        k = self.counts.shape[0]
        if self.cell_of.size and (
            self.cell_of.min() < 0 or self.cell_of.max() >= k
        ):
            raise ValueError("cell ids out of range")
        expected = np.bincount(self.cell_of, minlength=k)
        if not np.array_equal(expected, self.counts):
            raise ValueError("counts inconsistent with cell ids")

    @classmethod
    def from_cells(cls, cell_of: np.ndarray, k: int) -> "Assignment":
        cell_of = np.asarray(cell_of, dtype=np.int64)
        return cls(cell_of, np.bincount(cell_of, minlength=k))

    @property
    def n(self) -> int:
        return self.cell_of.shape[0]


@dataclass
class LloydResult:
    """Full k-means output: codebook, assignment and convergence record."""

    centroids: Centroids
    assignment: Assignment
    distortions: list[float] = field(default_factory=list)
    iterations: int = 0

    @property
    def final_distortion(self) -> float:
        return self.distortions[-1]


def _check_k(k: int, count: int) -> None:
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    if k > count:
        raise ValueError(f"k={k} exceeds number of points {count}")


def init_centroids(
    data: VectorSet, k: int, seed: int, method: str = INIT_KMEANS_PP
) -> Centroids:
    """Pick k starting centroids, deterministically per seed.

    ``random-points`` selects k distinct rows; ``kmeans-plus-plus`` samples
    by the standard D^2 weighting.
    """
    _check_k(k, data.count)
    rng = np.random.default_rng(seed)
    if method == INIT_RANDOM_POINTS:
        idx = rng.choice(data.count, size=k, replace=False)
        return Centroids(data.data[np.sort(idx)].astype(np.float32))
    if method != INIT_KMEANS_PP:
        raise ValueError(f"unknown init method: {method!r}")

    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = rng.integers(data.count)
    best = sqdist_to_centroids(data.data, data.data[chosen[0]][None, :])[:, 0]
    for i in range(1, k):
        total = best.sum()
        if total <= 0.0:
            # All remaining mass at distance zero: fall back to unchosen rows.
            remaining = np.setdiff1d(np.arange(data.count), chosen[:i])
            chosen[i] = remaining[0]
        else:
            chosen[i] = rng.choice(data.count, p=best / total)
        new_d = sqdist_to_centroids(data.data, data.data[chosen[i]][None, :])[:, 0]
        np.minimum(best, new_d, out=best)
    return Centroids(data.data[chosen].astype(np.float32))


def assign_plain(data: VectorSet, centroids: Centroids) -> Assignment:
    """Assign each point to its nearest centroid (squared L2, lowest-index
    tie-break)."""
    if data.dim != centroids.dim:
        raise ValueError(
            f"dimension mismatch: data dim {data.dim}, centroids dim {centroids.dim}"
        )
    d2 = sqdist_to_centroids(data.data, centroids.points)
    return Assignment.from_cells(np.argmin(d2, axis=1), centroids.k)


def _update_means(
    data: VectorSet, assignment: Assignment, previous: Centroids
) -> Centroids:
    """Mean update with deterministic empty-cluster repair.

    An empty cluster is reseeded with the data point farthest from its
    current centroid; repeated empties take successively farther points so
    two empty clusters never grab the same row.
    """
    k = previous.k
    cells = assignment.cell_of
    sums = np.zeros((k, data.dim), dtype=np.float64)
    np.add.at(sums, cells, data.data.astype(np.float64))
    counts = assignment.counts
    new_points = previous.points.astype(np.float64).copy()
    filled = counts > 0
    new_points[filled] = sums[filled] / counts[filled, None]

    empty = np.flatnonzero(~filled)
    if empty.size:
        taken: set[int] = set()
        for cell in empty:
            d2 = sqdist_to_centroids(
                data.data, previous.points[cell][None, :].astype(np.float64)
            )[:, 0]
            order = np.argsort(-d2, kind="stable")
            pick = next(int(p) for p in order if int(p) not in taken)
            taken.add(pick)
            new_points[cell] = data.data[pick].astype(np.float64)
    return Centroids(new_points.astype(np.float32))


def lloyd_full(
    data: VectorSet,
    k: int,
    seed: int,
    max_iters: int = DEFAULT_MAX_ITERS,
    rel_tol: float = DEFAULT_REL_TOL,
    init_method: str = INIT_KMEANS_PP,
) -> LloydResult:
    """Run Lloyd's algorithm and keep the full distortion trace.

    Alternates assignment and mean update until the relative distortion
    decrease drops below ``rel_tol`` or ``max_iters`` update passes ran.
    The returned assignment is consistent with the returned centroids, and
    the distortion sequence is non-increasing.
    """
    if data.count == 0:
        raise ValueError("cannot cluster an empty dataset")
    _check_k(k, data.count)
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")

    centroids = init_centroids(data, k, seed, init_method)
    assignment = assign_plain(data, centroids)
    prev = _distortion(data, centroids, assignment)
    distortions = [prev]
    iterations = 0
    for _ in range(max_iters):
        centroids = _update_means(data, assignment, centroids)
        assignment = assign_plain(data, centroids)
        cur = _distortion(data, centroids, assignment)
        distortions.append(cur)
        iterations += 1
        if cur == 0.0:
            break
        if prev > 0.0 and (prev - cur) / prev < rel_tol:
            break
        prev = cur
    return LloydResult(centroids, assignment, distortions, iterations)


def lloyd(
    data: VectorSet,
    k: int,
    seed: int,
    max_iters: int = DEFAULT_MAX_ITERS,
    rel_tol: float = DEFAULT_REL_TOL,
    init_method: str = INIT_KMEANS_PP,
) -> tuple[Centroids, Assignment]:
    """Standard k-means; returns the final centroids and assignment."""
    result = lloyd_full(data, k, seed, max_iters, rel_tol, init_method)
    return result.centroids, result.assignment


def _distortion(
    data: VectorSet, centroids: Centroids, assignment: Assignment
) -> float:
    """Total squared distance from each point to its assigned centroid."""
    d2 = sqdist_to_centroids(data.data, centroids.points)
    return float(d2[np.arange(data.count), assignment.cell_of].sum())


def save_centroid_meta(path: str | os.PathLike, meta: dict) -> None:
    """Write a key=value sidecar next to a persisted codebook."""
    lines = [f"{key}={value}" for key, value in meta.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def load_centroid_meta(path: str | os.PathLike) -> dict[str, str]:
    """Read a key=value sidecar written by :func:`save_centroid_meta`."""
    meta: dict[str, str] = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        key, _, value = line.partition("=")
        meta[key] = value
    return meta
