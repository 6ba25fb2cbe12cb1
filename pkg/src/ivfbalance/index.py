"""Inverted-file index with multi-probe search over a balanced codebook.

Cell contents are defined by the penalized assignment, so query routing
uses penalized distances too by default: routing with plain distances would
probe cells inconsistent with what is stored in them. Candidates are always
re-ranked by true (unpenalized) squared L2; penalties only steer which
cells get scanned. The ``plain`` route is available for measuring the
difference.

The index is immutable after build; concurrent searches over a shared
index are safe.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .balancer import (
    CENTROIDS_FILE,
    META_FILE,
    PENALTIES_FILE,
    Codebook,
    assign_balanced,
    load_codebook,
    save_codebook,
)
from .dataset import VectorSet
from .distances import sqdist_exact, sqdist_to_centroids
from .kmeans import load_centroid_meta, save_centroid_meta

LISTS_FILE = "lists.bin"

ROUTE_PENALIZED = "penalized"
ROUTE_PLAIN = "plain"

DEFAULT_R_RESULTS = 100


@dataclass(frozen=True)
class SearchParams:
    """Probe count, result length, and the routing flag."""

    ma: int
    r_results: int = DEFAULT_R_RESULTS
    route: str = ROUTE_PENALIZED

    def __post_init__(self) -> None:
        if self.ma < 1:
            raise ValueError("ma must be >= 1")
        if self.r_results < 1:
            raise ValueError("r_results must be >= 1")
        if self.route not in (ROUTE_PENALIZED, ROUTE_PLAIN):
            raise ValueError(f"unknown route: {self.route!r}")


@dataclass(eq=False)
class QueryResult:
    """Ranked hits (ascending true distance, ties by id) plus scan cost."""

    ids: np.ndarray
    dists: np.ndarray
    scanned: int
    probed_cells: np.ndarray

    @property
    def hits(self) -> list[tuple[int, float]]:
        return [(int(i), float(d)) for i, d in zip(self.ids, self.dists)]


@dataclass(eq=False)
class InvertedFile:
    """Codebook plus one posting list of point ids per cell.

    Every indexed id appears in exactly one list; list i holds exactly the
    points the penalized assignment maps to cell i.
    """

    codebook: Codebook
    lists: list[np.ndarray]
    source: VectorSet
    _cell_of: np.ndarray = field(default=None, repr=False)

    @property
    def k(self) -> int:
        return self.codebook.k

    @property
    def count(self) -> int:
        return self.source.count

    def list_sizes(self) -> np.ndarray:
        return np.array([len(lst) for lst in self.lists], dtype=np.int64)

    def cell_of_points(self) -> np.ndarray:
        """Inverse mapping: the cell id storing each point."""
        if self._cell_of is None:
            cell_of = np.empty(self.source.count, dtype=np.int64)
            for cell, ids in enumerate(self.lists):
                cell_of[ids] = cell
            self._cell_of = cell_of
        return self._cell_of


def build(data: VectorSet, codebook: Codebook) -> InvertedFile:
    """Quantize the data into k posting lists under the codebook's penalties."""
    if data.count == 0:
        raise ValueError("cannot index an empty dataset")
    assignment = assign_balanced(data, codebook)
    order = np.argsort(assignment.cell_of, kind="stable")
    bounds = np.cumsum(assignment.counts)[:-1]
    lists = [ids.astype(np.int64) for ids in np.split(order, bounds)]
    return InvertedFile(codebook, lists, data, assignment.cell_of.copy())


def route_cells_batch(
    queries: np.ndarray, codebook: Codebook, ma: int, route: str = ROUTE_PENALIZED
) -> np.ndarray:
    """Per query, the ma nearest cells (ascending, lowest-index tie-break).

    Returns a (Q, ma) int array. Uses the same distance path as assignment,
    so routing a stored point with ma=1 lands on its own cell.
    """
    if not 1 <= ma <= codebook.k:
        raise ValueError(f"ma={ma} out of range [1, {codebook.k}]")
    if route not in (ROUTE_PENALIZED, ROUTE_PLAIN):
        raise ValueError(f"unknown route: {route!r}")
    d2 = sqdist_to_centroids(queries, codebook.centroids.points)
    if route == ROUTE_PENALIZED:
        d2 += codebook.penalties[None, :]
    return np.argsort(d2, axis=1, kind="stable")[:, :ma]


def select_cells(
    query: np.ndarray, codebook: Codebook, ma: int, route: str = ROUTE_PENALIZED
) -> np.ndarray:
    """The ma cells nearest to one query vector, in probe order."""
    query = np.asarray(query)
    if query.ndim != 1:
        raise ValueError("query must be a 1-d vector")
    if query.shape[0] != codebook.dim:
        raise ValueError(
            f"dimension mismatch: query dim {query.shape[0]}, "
            f"codebook dim {codebook.dim}"
        )
    return route_cells_batch(query[None, :], codebook, ma, route)[0]


def search(index: InvertedFile, query: np.ndarray, params: SearchParams) -> QueryResult:
    """Scan the probed cells and return the top results by true distance.

    ``scanned`` is the summed population of the probed cells: the quantity
    whose spread across queries measures response-time variability.
    """
    cells = select_cells(query, index.codebook, params.ma, params.route)
    candidates = (
        np.concatenate([index.lists[c] for c in cells])
        if len(cells)
        else np.empty(0, dtype=np.int64)
    )
    if candidates.size == 0:
        return QueryResult(
            ids=np.empty(0, dtype=np.int64),
            dists=np.empty(0, dtype=np.float64),
            scanned=0,
            probed_cells=cells,
        )
    query64 = np.asarray(query, dtype=np.float64)
    d2 = sqdist_exact(query64[None, :], index.source.data[candidates])[0]
    order = np.lexsort((candidates, d2))[: params.r_results]
    return QueryResult(
        ids=candidates[order],
        dists=d2[order],
        scanned=int(candidates.size),
        probed_cells=cells,
    )


def _sha256(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


def _encode_lists(lists: list[np.ndarray]) -> bytes:
    chunks = []
    for ids in lists:
        chunks.append(np.int32(len(ids)).tobytes())
        chunks.append(np.asarray(ids, dtype="<i4").tobytes())
    return b"".join(chunks)


def _decode_lists(raw: bytes, k: int) -> list[np.ndarray]:
    lists = []
    offset = 0
    for cell in range(k):
        if offset + 4 > len(raw):
            raise ValueError(f"posting-list file truncated at list {cell}")
        length = int(np.frombuffer(raw, dtype="<i4", count=1, offset=offset)[0])
        offset += 4
        if length < 0 or offset + 4 * length > len(raw):
            raise ValueError(f"posting-list file truncated at list {cell}")
        ids = np.frombuffer(raw, dtype="<i4", count=length, offset=offset)
        lists.append(ids.astype(np.int64))
        offset += 4 * length
    if offset != len(raw):
        raise ValueError("posting-list file has trailing bytes")
    return lists


def save_index(index: InvertedFile, directory: str | os.PathLike) -> None:
    """Persist the index directory: codebook files, lists.bin and meta.txt.

    meta.txt records k, dim, N, the balancing iteration, and sha256
    checksums of every artifact plus the indexed data buffer, so load can
    verify it is being paired with the right dataset.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_codebook(index.codebook, directory)
    lists_blob = _encode_lists(index.lists)
    (directory / LISTS_FILE).write_bytes(lists_blob)
    meta = {
        "k": index.codebook.k,
        "dim": index.codebook.dim,
        "iteration": index.codebook.iteration,
        "n": index.source.count,
        "checksum_centroids": _sha256((directory / CENTROIDS_FILE).read_bytes()),
        "checksum_penalties": _sha256((directory / PENALTIES_FILE).read_bytes()),
        "checksum_lists": _sha256(lists_blob),
        "checksum_data": _sha256(index.source.data.tobytes()),
    }
    save_centroid_meta(directory / META_FILE, meta)


def load_index(directory: str | os.PathLike, data: VectorSet) -> InvertedFile:
    """Load a persisted index and bind it to its source vectors.

    Raises ValueError if any checksum disagrees or the supplied data does
    not match the dataset the index was built over.
    """
    directory = Path(directory)
    meta = load_centroid_meta(directory / META_FILE)
    for filename, key in (
        (CENTROIDS_FILE, "checksum_centroids"),
        (PENALTIES_FILE, "checksum_penalties"),
        (LISTS_FILE, "checksum_lists"),
    ):
        actual = _sha256((directory / filename).read_bytes())
        if meta.get(key) != actual:
            raise ValueError(f"checksum mismatch for {filename}")
    if meta.get("checksum_data") != _sha256(data.data.tobytes()):
        raise ValueError("supplied vectors do not match the indexed dataset")
    if int(meta["n"]) != data.count or int(meta["dim"]) != data.dim:
        raise ValueError("dataset shape disagrees with index metadata")
    codebook = load_codebook(directory)
    lists = _decode_lists((directory / LISTS_FILE).read_bytes(), codebook.k)
    total = sum(len(lst) for lst in lists)
    if total != data.count:
        raise ValueError(
            f"posting lists cover {total} ids, dataset has {data.count}"
        )
    return InvertedFile(codebook, lists, data)
