"""Cosine and CSLS retrieval over (possibly large) vocabularies.

CSLS(x, y) = 2 cos(x, y) - r_Y(x) - r_X(y), where r_Y(x) is the mean cosine
of x to its ``n`` nearest neighbours among the keys and r_X(y) the same for
y against the queries. Scores are produced block-wise so that a
(queries x keys) matrix never has to be materialised when only the top-k is
needed.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ArgumentError, ShapeError

DEFAULT_BLOCK = 1024
DEFAULT_N = 10


@dataclass
class NeighborResult:
    """Top-k neighbours for a batch of queries (row q belongs to query q).

    Scores are non-increasing along each row; ties go to the lower index.
    """

    indices: np.ndarray
    scores: np.ndarray

    def __len__(self):
        return self.indices.shape[0]

    def __getitem__(self, q):
        return self.indices[q], self.scores[q]


def normalize_rows(x):
    """Unit-length rows in float64; all-zero rows stay zero."""
    x = np.asarray(x, dtype=np.float64)
    norms = np.sqrt(np.einsum("ij,ij->i", x, x))
    norms[norms == 0] = 1.0
    return x / norms[:, None]


def _check(queries, keys):
    if queries.ndim != 2 or keys.ndim != 2 or queries.shape[1] != keys.shape[1]:
        raise ShapeError(f"queries {queries.shape} and keys {keys.shape} disagree")


def _blocks(total, block_size):
    block_size = max(1, int(block_size))
    for start in range(0, total, block_size):
        yield start, min(total, start + block_size)


def cosine_topk(queries, keys, k, block_size=DEFAULT_BLOCK):
    queries = normalize_rows(queries)
    keys = normalize_rows(keys)
    _check(queries, keys)
    if not 1 <= k <= keys.shape[0]:
        raise ArgumentError(f"k={k} must be in [1, {keys.shape[0]}]")
    idx = np.empty((queries.shape[0], k), dtype=np.int64)
    val = np.empty((queries.shape[0], k))
    for a, b in _blocks(queries.shape[0], block_size):
        idx[a:b], val[a:b] = kernels.topk_rows(queries[a:b] @ keys.T, k)
    return NeighborResult(idx, val)


def mean_topk_cosine(points, other_space, n=DEFAULT_N, block_size=DEFAULT_BLOCK):
    """Mean cosine of every point to its ``n`` nearest rows of ``other_space``."""
    return _mean_topk_unit(normalize_rows(points), normalize_rows(other_space), n, block_size)


def _mean_topk_unit(points, other, n, block_size):
    _check(points, other)
    if not 1 <= n <= other.shape[0]:
        raise ArgumentError(f"n={n} must be in [1, {other.shape[0]}]")
    out = np.empty(points.shape[0])
    for a, b in _blocks(points.shape[0], block_size):
        out[a:b] = kernels.topk_mean(points[a:b] @ other.T, n)
    return out


def _penalties(queries, keys, n, r_queries, r_keys, block_size):
    if r_queries is None:
        r_queries = _mean_topk_unit(queries, keys, n, block_size)
    if r_keys is None:
        r_keys = _mean_topk_unit(keys, queries, n, block_size)
    r_queries = np.asarray(r_queries, dtype=np.float64)
    r_keys = np.asarray(r_keys, dtype=np.float64)
    if r_queries.shape != (queries.shape[0],) or r_keys.shape != (keys.shape[0],):
        raise ArgumentError(
            f"penalty lengths {r_queries.shape}/{r_keys.shape} do not match "
            f"{queries.shape[0]} queries / {keys.shape[0]} keys")
    return r_queries, r_keys


def iter_csls_blocks(queries, keys, n=DEFAULT_N, r_queries=None, r_keys=None, block_size=DEFAULT_BLOCK):
    """Yield ``(start, stop, scores)`` for consecutive query blocks."""
    qn = normalize_rows(queries)
    kn = normalize_rows(keys)
    _check(qn, kn)
    r_queries, r_keys = _penalties(qn, kn, n, r_queries, r_keys, block_size)
    for a, b in _blocks(qn.shape[0], block_size):
        cos = qn[a:b] @ kn.T
        yield a, b, 2.0 * cos - r_queries[a:b, None] - r_keys[None, :]


def csls_scores(queries, keys, n=DEFAULT_N, r_queries=None, r_keys=None, block_size=DEFAULT_BLOCK):
    """Full (queries x keys) CSLS matrix."""
    out = np.empty((np.shape(queries)[0], np.shape(keys)[0]))
    for a, b, s in iter_csls_blocks(queries, keys, n, r_queries, r_keys, block_size):
        out[a:b] = s
    return out


def csls_topk(queries, keys, n=DEFAULT_N, k=1, r_queries=None, r_keys=None, block_size=DEFAULT_BLOCK):
    if not 1 <= k <= np.shape(keys)[0]:
        raise ArgumentError(f"k={k} must be in [1, {np.shape(keys)[0]}]")
    q = np.shape(queries)[0]
    idx = np.empty((q, k), dtype=np.int64)
    val = np.empty((q, k))
    for a, b, s in iter_csls_blocks(queries, keys, n, r_queries, r_keys, block_size):
        idx[a:b], val[a:b] = kernels.topk_rows(s, k)
    return NeighborResult(idx, val)
