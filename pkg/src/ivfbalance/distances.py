"""Squared-L2 distance kernels shared by clustering, indexing and evaluation.

Two kernels with different determinism/speed trade-offs:

* :func:`sqdist_to_centroids` uses the BLAS expansion trick. It is fast and
  deterministic for identical inputs, which is all that assignment and query
  routing need (the callers that must agree always pass identical arrays).
* :func:`sqdist_exact` computes elementwise differences, so each (row, col)
  distance is bitwise identical no matter how candidates are sliced,
  permuted, or batched. Candidate scoring and ground truth use this one:
  an exhaustive multi-probe search must reproduce the brute-force ranking
  exactly, ties included.

All arithmetic is float64 regardless of input dtype; float32 inputs widen
exactly.
"""

from __future__ import annotations

import numpy as np

# Chunk row count so a temporary (rows, k, dim) float64 block stays ~128 MiB.
_CHUNK_ELEMS = 16 * 1024 * 1024


def _as_f64_matrix(a: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-d, got shape {a.shape}")
    return np.ascontiguousarray(a, dtype=np.float64)


def _check_dims(x: np.ndarray, c: np.ndarray) -> None:
    if x.shape[1] != c.shape[1]:
        raise ValueError(
            f"dimension mismatch: vectors have dim {x.shape[1]}, "
            f"centroids have dim {c.shape[1]}"
        )


def sqdist_to_centroids(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Squared L2 distances from each row of ``x`` to each row of ``c``.

    Returns an (n, k) float64 matrix, clipped at zero (the expansion
    ``|x|^2 + |c|^2 - 2 x.c`` can go slightly negative for near-identical
    pairs).
    """
    x = _as_f64_matrix(x, "x")
    c = _as_f64_matrix(c, "c")
    _check_dims(x, c)
    n, d = x.shape
    k = c.shape[0]
    c_sq = np.einsum("ij,ij->i", c, c)
    out = np.empty((n, k), dtype=np.float64)
    rows = max(1, _CHUNK_ELEMS // max(1, k * d))
    for start in range(0, n, rows):
        stop = min(start + rows, n)
        xb = x[start:stop]
        x_sq = np.einsum("ij,ij->i", xb, xb)
        block = x_sq[:, None] + c_sq[None, :]
        block -= 2.0 * (xb @ c.T)
        np.clip(block, 0.0, None, out=block)
        out[start:stop] = block
    return out


def sqdist_exact(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Elementwise-exact squared L2 distances, (n, k) float64.

    Each entry is computed as ``sum((x_i - c_j)**2)`` over its own pair of
    rows only, so results do not depend on which other rows are present.
    """
    x = _as_f64_matrix(x, "x")
    c = _as_f64_matrix(c, "c")
    _check_dims(x, c)
    n, d = x.shape
    k = c.shape[0]
    out = np.empty((n, k), dtype=np.float64)
    rows = max(1, _CHUNK_ELEMS // max(1, k * max(1, d)))
    for start in range(0, n, rows):
        stop = min(start + rows, n)
        diff = x[start:stop, None, :] - c[None, :, :]
        np.einsum("ijk,ijk->ij", diff, diff, out=out[start:stop])
    return out


def sqdist_vector(x: np.ndarray, y: np.ndarray) -> float:
    """Exact squared L2 distance between two 1-d vectors, in float64."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1:
        raise ValueError("sqdist_vector expects 1-d vectors")
    if x.shape[0] != y.shape[0]:
        raise ValueError(
            f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}"
        )
    diff = x - y
    return float(np.dot(diff, diff))
