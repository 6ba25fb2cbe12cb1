"""Iterative cluster balancing via per-cell distance penalties.

Each cell carries a penalty ``b_i`` added to squared distances. Overfull
cells get their penalty inflated multiplicatively, underfull cells deflated:

    b_i(0)   = 1
    b_i(l+1) = b_i(l) * (n_i(l) / n_opt) ** alpha

with ``n_opt = N / k``. Reassigning under the penalized distance
``d(x, c_i)^2 + b_i`` then drains points from crowded cells into their
neighbors, driving populations toward ``n_opt``. Centroid positions are
never re-estimated during balancing; only the penalties move.

Geometrically, the penalized distance equals the plain squared L2 distance
in a (d+1)-space where point x becomes (x, 0) and centroid i becomes
(c_i, sqrt(b_i)): balancing elevates crowded centroids off the data
hyperplane, shrinking their cells. :func:`embed_augmented` exposes that view
for verification.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import VectorSet, load_fvecs, save_fvecs
from .distances import sqdist_to_centroids, sqdist_vector
from .kmeans import Assignment, Centroids, load_centroid_meta, save_centroid_meta
from .metrics import imbalance_factor

DEFAULT_ALPHA = 0.01
DEFAULT_B_FLOOR = 1e-9
DEFAULT_MAX_ITERS_CAP = 1000
COUNT_FLOOR = 1

STOP_FIXED_ITERS = "fixed_iters"
STOP_TARGET_GAMMA = "target_gamma"
STOP_TARGET_FRACTION = "target_fraction"

CENTROIDS_FILE = "centroids.fvecs"
PENALTIES_FILE = "penalties.txt"
META_FILE = "meta.txt"


@dataclass(eq=False)
class Codebook:
    """Centroids plus per-cell penalties and the balancing iteration count.

    A fresh codebook has every penalty at 1 (squared-distance units, so the
    initial influence depends on data scale; see ``BalanceTrace.scale_ratio``
    for a diagnostic). Treated as an immutable value between iterations.
    """

    centroids: Centroids
    penalties: np.ndarray
    iteration: int = 0

    def __post_init__(self) -> None:
        self.penalties = np.asarray(self.penalties, dtype=np.float64)
        if self.penalties.shape != (self.centroids.k,):
            raise ValueError(
                f"expected {self.centroids.k} penalties, "
                f"got shape {self.penalties.shape}"
            )
        if not np.isfinite(self.penalties).all() or (self.penalties < 0).any():
            raise ValueError("penalties must be finite and non-negative")
        if self.iteration < 0:
            raise ValueError("iteration must be non-negative")

    @classmethod
    def fresh(cls, centroids: Centroids) -> "Codebook":
        return cls(centroids, np.ones(centroids.k, dtype=np.float64), 0)

    @property
    def k(self) -> int:
        return self.centroids.k

    @property
    def dim(self) -> int:
        return self.centroids.dim


@dataclass(frozen=True)
class StopRule:
    """When to end the balancing loop.

    ``fixed_iters(r)`` runs exactly r penalty updates. ``target_gamma(g)``
    stops once the imbalance factor is <= g. ``target_fraction(f)`` stops
    once the excess over 1 has shrunk to a fraction f of the initial excess,
    i.e. gamma <= 1 + f * (gamma_0 - 1).
    """

    kind: str
    value: float

    @classmethod
    def fixed_iters(cls, r: int) -> "StopRule":
        if r < 0:
            raise ValueError("iteration count must be >= 0")
        return cls(STOP_FIXED_ITERS, int(r))

    @classmethod
    def target_gamma(cls, gamma: float) -> "StopRule":
        if gamma < 1.0:
            raise ValueError(f"target gamma {gamma} is unreachable (gamma >= 1)")
        return cls(STOP_TARGET_GAMMA, float(gamma))

    @classmethod
    def target_fraction(cls, f: float) -> "StopRule":
        if not 0.0 < f <= 1.0:
            raise ValueError(f"target fraction must be in (0, 1], got {f}")
        return cls(STOP_TARGET_FRACTION, float(f))

    def describe(self) -> str:
        if self.kind == STOP_FIXED_ITERS:
            return f"fixed_iters({int(self.value)})"
        return f"{self.kind}({self.value})"


@dataclass(frozen=True)
class BalanceConfig:
    """Balancing parameters: speed exponent, stop rule and guards."""

    stop: StopRule
    alpha: float = DEFAULT_ALPHA
    b_floor: float = DEFAULT_B_FLOOR
    max_iters_cap: int = DEFAULT_MAX_ITERS_CAP

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.b_floor <= 0:
            raise ValueError("b_floor must be positive")
        if self.max_iters_cap < 0:
            raise ValueError("max_iters_cap must be >= 0")


@dataclass
class TraceRecord:
    """State at the start of balancing iteration l, before the l-th update."""

    iteration: int
    gamma: float
    b_min: float
    b_max: float
    b_mean: float
    n_min: int
    n_max: int
    counts: np.ndarray
    penalties: np.ndarray


@dataclass
class BalanceTrace:
    """Per-iteration balancing record, one entry per completed iteration.

    ``scale_ratio`` is the mean squared nearest-centroid distance at
    iteration 0 divided by the unit initial penalty: values far from 1 mean
    the default b=1 is out of scale with the data.
    """

    records: list[TraceRecord] = field(default_factory=list)
    scale_ratio: float = float("nan")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def gammas(self) -> np.ndarray:
        return np.array([r.gamma for r in self.records])

    def to_csv(self, path: str | os.PathLike) -> None:
        """Export aggregates as CSV: iter,gamma,b_min,b_max,b_mean,n_min,n_max."""
        lines = ["iter,gamma,b_min,b_max,b_mean,n_min,n_max"]
        for r in self.records:
            lines.append(
                f"{r.iteration},{r.gamma!r},{r.b_min!r},{r.b_max!r},"
                f"{r.b_mean!r},{r.n_min},{r.n_max}"
            )
        Path(path).write_text("\n".join(lines) + "\n")


def penalized_distance_sq(x: np.ndarray, c: np.ndarray, b: float) -> float:
    """Squared L2 distance from x to c plus the cell penalty b."""
    if b < 0:
        raise ValueError("penalty must be non-negative")
    return sqdist_vector(x, c) + float(b)


def penalized_sqdist_matrix(data: np.ndarray, codebook: Codebook) -> np.ndarray:
    """(n, k) matrix of penalized squared distances to every centroid."""
    d2 = sqdist_to_centroids(data, codebook.centroids.points)
    d2 += codebook.penalties[None, :]
    return d2


def assign_balanced(data: VectorSet, codebook: Codebook) -> Assignment:
    """Assign each point to the cell minimizing the penalized squared
    distance (lowest-index tie-break)."""
    if data.dim != codebook.dim:
        raise ValueError(
            f"dimension mismatch: data dim {data.dim}, codebook dim {codebook.dim}"
        )
    d2 = penalized_sqdist_matrix(data.data, codebook)
    return Assignment.from_cells(np.argmin(d2, axis=1), codebook.k)


def update_penalties(
    codebook: Codebook,
    counts: np.ndarray,
    n_opt: float,
    alpha: float,
    b_floor: float = DEFAULT_B_FLOOR,
) -> Codebook:
    """One multiplicative penalty update; returns a new Codebook.

    Zero counts are clamped to 1 inside the ratio (a zero count would make
    b=0 an absorbing state) and the result is clamped to ``b_floor``.
    """
    counts = np.asarray(counts)
    if counts.shape != (codebook.k,):
        raise ValueError(f"expected {codebook.k} counts, got shape {counts.shape}")
    if n_opt <= 0:
        raise ValueError("n_opt must be positive")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    ratio = np.maximum(counts, COUNT_FLOOR) / float(n_opt)
    new_b = np.maximum(codebook.penalties * ratio**alpha, b_floor)
    return Codebook(codebook.centroids, new_b, codebook.iteration + 1)


def _stop_satisfied(stop: StopRule, iteration: int, gamma: float, gamma0: float) -> bool:
    if stop.kind == STOP_FIXED_ITERS:
        return iteration >= stop.value
    if stop.kind == STOP_TARGET_GAMMA:
        return gamma <= stop.value
    if stop.kind == STOP_TARGET_FRACTION:
        return gamma <= 1.0 + stop.value * (gamma0 - 1.0)
    raise ValueError(f"unknown stop rule: {stop.kind!r}")


def balance(
    data: VectorSet, codebook: Codebook, config: BalanceConfig
) -> tuple[Codebook, BalanceTrace]:
    """Run the balancing loop; returns the final codebook and the trace.

    Each iteration reassigns points under the current penalties, records
    the imbalance factor and penalty/count statistics, checks the stop rule,
    then applies one penalty update. ``max_iters_cap`` bounds the number of
    updates regardless of the rule. Convergence is empirical, not
    guaranteed; on pathological inputs the cap is the backstop.
    """
    if data.count == 0:
        raise ValueError("cannot balance an empty dataset")
    if data.dim != codebook.dim:
        raise ValueError(
            f"dimension mismatch: data dim {data.dim}, codebook dim {codebook.dim}"
        )
    n_opt = data.count / codebook.k
    trace = BalanceTrace()
    gamma0 = float("nan")
    iteration = 0
    while True:
        assignment = assign_balanced(data, codebook)
        gamma = imbalance_factor(assignment.counts)
        if iteration == 0:
            gamma0 = gamma
            trace.scale_ratio = _mean_nearest_sqdist(data, codebook)
        b = codebook.penalties
        trace.records.append(
            TraceRecord(
                iteration=iteration,
                gamma=gamma,
                b_min=float(b.min()),
                b_max=float(b.max()),
                b_mean=float(b.mean()),
                n_min=int(assignment.counts.min()),
                n_max=int(assignment.counts.max()),
                counts=assignment.counts.copy(),
                penalties=b.copy(),
            )
        )
        if _stop_satisfied(config.stop, iteration, gamma, gamma0):
            break
        if iteration >= config.max_iters_cap:
            break
        codebook = update_penalties(
            codebook, assignment.counts, n_opt, config.alpha, config.b_floor
        )
        iteration += 1
    return codebook, trace


def _mean_nearest_sqdist(data: VectorSet, codebook: Codebook) -> float:
    """Mean squared distance to the nearest centroid (plain, unpenalized)."""
    d2 = sqdist_to_centroids(data.data, codebook.centroids.points)
    return float(d2.min(axis=1).mean())


def embed_augmented(codebook: Codebook) -> Centroids:
    """Centroids lifted into (d+1)-space: row i becomes (c_i, sqrt(b_i)).

    Plain squared L2 between an embedded point (x, 0) and these rows equals
    the penalized squared distance. Returned in float64: the last coordinate
    must square back to b_i at full precision.
    """
    pts = codebook.centroids.points.astype(np.float64)
    lift = np.sqrt(codebook.penalties)
    return Centroids(np.hstack([pts, lift[:, None]]))


def embed_points(vectors: np.ndarray) -> np.ndarray:
    """Companion point embedding: append a zero coordinate to each row."""
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("expected a 2-d array of vectors")
    return np.hstack([arr, np.zeros((arr.shape[0], 1))])


def save_codebook(
    codebook: Codebook, directory: str | os.PathLike, extra_meta: dict | None = None
) -> None:
    """Persist a codebook: centroids.fvecs, penalties.txt, meta.txt.

    Centroids round to float32 on disk (fvecs); in-memory centroids are
    float32 already, so save/load round-trips bit-exactly. Penalties are
    written one float64 repr per line (lossless).
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_fvecs(
        VectorSet.from_array(codebook.centroids.points), directory / CENTROIDS_FILE
    )
    penalty_lines = "\n".join(repr(float(b)) for b in codebook.penalties)
    (directory / PENALTIES_FILE).write_text(penalty_lines + "\n")
    meta = {
        "k": codebook.k,
        "dim": codebook.dim,
        "iteration": codebook.iteration,
    }
    meta.update(extra_meta or {})
    save_centroid_meta(directory / META_FILE, meta)


def load_codebook(directory: str | os.PathLike) -> Codebook:
    """Load a codebook persisted by :func:`save_codebook`."""
    directory = Path(directory)
    centroids = Centroids(load_fvecs(directory / CENTROIDS_FILE).data)
    penalties_path = directory / PENALTIES_FILE
    if penalties_path.is_file():
        values = [
            float(line)
            for line in penalties_path.read_text().splitlines()
            if line.strip()
        ]
        penalties = np.array(values, dtype=np.float64)
    else:
        penalties = np.ones(centroids.k, dtype=np.float64)
    meta = load_centroid_meta(directory / META_FILE)
    iteration = int(meta.get("iteration", 0))
    return Codebook(centroids, penalties, iteration)
