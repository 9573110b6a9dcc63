"""k-nearest-neighbour registration of query edge maps against a dictionary.

Two metrics are supported: the chamfer score (mean query-edge distance at
the template's set pixels) and the Euclidean distance between HOG
descriptors.  Both scans are exhaustive and exact; ties break toward the
lower entry index so results are fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dictionary import Dictionary
from .errors import EmptyDictionary, EmptyEdgeMap
from .features import check_edge_map, distance_transform, hog

METRICS = ("chamfer", "hog")

# Above this size the HOG scan preselects candidates with a float32 matrix
# product before exact rescoring; below it the exact scan runs directly.
_DIRECT_SCAN_LIMIT = 4096


@dataclass(frozen=True)
class Candidate:
    """One retrieved dictionary entry with its metric distance."""

    entry_index: int
    distance: float
    metric: str


@dataclass(frozen=True)
class CandidateSet:
    """Candidates for one query, sorted by non-decreasing distance."""

    candidates: tuple[Candidate, ...]
    query_id: str = ""

    def __post_init__(self):
        d = [c.distance for c in self.candidates]
        if any(b < a for a, b in zip(d, d[1:])):
            raise ValueError("candidates must be sorted by distance")

    def __len__(self) -> int:
        return len(self.candidates)

    def __getitem__(self, i: int) -> Candidate:
        return self.candidates[i]


def _check_query(query: np.ndarray, dct: Dictionary) -> np.ndarray:
    if len(dct) == 0:
        raise EmptyDictionary("dictionary has no entries")
    w, h = dct.raster_size
    query = check_edge_map(query, shape=(h, w))
    if not query.any():
        raise EmptyEdgeMap("query edge map has no set pixels")
    return query


def knn_chamfer(
    query: np.ndarray,
    dct: Dictionary,
    k: int = 5,
    eps: float = 0.0,
    query_id: str = "",
) -> CandidateSet:
    """k nearest entries under the chamfer score.

    The query's distance transform is computed once and summed over each
    entry's set pixels, normalized by the entry's pixel count.  With
    eps > 0 only entries within (1 + eps) of the best score are returned,
    still truncated to k.
    """
    query = _check_query(query, dct)
    if k < 1:
        raise ValueError("k must be >= 1")
    t = distance_transform(query).ravel()
    sums = np.add.reduceat(t[dct.chamfer_indices], dct.chamfer_offsets)
    scores = sums / dct.chamfer_counts
    order = np.argsort(scores, kind="stable")
    if eps > 0.0:
        order = order[scores[order] <= (1.0 + eps) * scores[order[0]]]
    order = order[:k]
    return CandidateSet(
        tuple(Candidate(int(j), float(scores[j]), "chamfer") for j in order),
        query_id=query_id,
    )


def _exact_hog_d2(matrix: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Exact squared distances accumulated in float64, chunked."""
    out = np.empty(len(matrix))
    q64 = q.astype(np.float64)
    chunk = max(1, (1 << 23) // max(matrix.shape[1], 1))
    for start in range(0, len(matrix), chunk):
        stop = min(start + chunk, len(matrix))
        diff = matrix[start:stop].astype(np.float64) - q64
        out[start:stop] = np.einsum("ij,ij->i", diff, diff)
    return out


def knn_hog(
    query: np.ndarray, dct: Dictionary, k: int = 5, query_id: str = ""
) -> CandidateSet:
    """k nearest entries by Euclidean distance between HOG descriptors.

    Equivalent to an exact float64 linear scan.  Large dictionaries are
    preselected with a float32 matrix product whose error bound widens the
    candidate band, so no true top-k member can be excluded before the
    exact rescoring.
    """
    query = _check_query(query, dct)
    if k < 1:
        raise ValueError("k must be >= 1")
    q = hog(query, dct.hog_config)
    matrix = dct.hog_matrix
    n = len(matrix)
    if n <= _DIRECT_SCAN_LIMIT:
        idx = np.arange(n)
        d2 = _exact_hog_d2(matrix, q)
    else:
        q64 = q.astype(np.float64)
        qn = float(q64 @ q64)
        mn = np.einsum("ij,ij->i", matrix, matrix, dtype=np.float64)
        approx = qn + mn - 2.0 * (matrix @ q).astype(np.float64)
        dim = matrix.shape[1]
        row_norm = float(np.sqrt(mn.max()))
        margin = 8.0 * dim * np.finfo(np.float32).eps * np.sqrt(qn) * max(row_norm, 1.0)
        kth = np.partition(approx, min(k, n) - 1)[min(k, n) - 1]
        idx = np.flatnonzero(approx <= kth + margin)
        d2 = _exact_hog_d2(matrix[idx], q)
    order = np.lexsort((idx, d2))[:k]
    return CandidateSet(
        tuple(
            Candidate(int(idx[j]), float(np.sqrt(d2[j])), "hog") for j in order
        ),
        query_id=query_id,
    )


def register_frame(
    query: np.ndarray,
    dct: Dictionary,
    metric: str = "hog",
    k: int = 5,
    eps: float = 0.0,
    query_id: str = "",
) -> CandidateSet:
    """Dispatch a single-frame registration to the chosen metric."""
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}, got {metric!r}")
    if metric == "chamfer":
        return knn_chamfer(query, dct, k=k, eps=eps, query_id=query_id)
    return knn_hog(query, dct, k=k, query_id=query_id)
