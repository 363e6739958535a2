"""Row-wise top-k selection kernels.

These run inside every retrieval call (lexicon induction, validation,
evaluation) over score blocks of shape ``(block, vocab)``, so they are the
hot loop of the package. Each kernel has a numba implementation and a pure
numpy one; both produce identical indices and the same values up to
summation order. Ties are broken toward the lower column index.
"""
import numpy as np

from . import _accel
from ._accel import njit

_use_numba = _accel.HAVE_NUMBA


def use_numba(flag=True):
    """Switch backends at runtime. Returns the previous setting."""
    global _use_numba
    prev = _use_numba
    if flag and not _accel.HAVE_NUMBA:
        raise RuntimeError("numba is not available (or disabled by MWALIGN_DISABLE_NUMBA)")
    _use_numba = bool(flag)
    return prev


def backend():
    return "numba" if _use_numba else "numpy"


@njit(cache=True, nogil=True)
def _topk_rows_nb(scores, k):
    q, m = scores.shape
    idx = np.empty((q, k), dtype=np.int64)
    val = np.empty((q, k), dtype=scores.dtype)
    for r in range(q):
        filled = 0
        for c in range(m):
            s = scores[r, c]
            if filled == k and not s > val[r, k - 1]:
                continue
            # strict comparisons keep earlier (lower-index) ties in front
            p = filled if filled < k else k - 1
            while p > 0 and val[r, p - 1] < s:
                val[r, p] = val[r, p - 1]
                idx[r, p] = idx[r, p - 1]
                p -= 1
            val[r, p] = s
            idx[r, p] = c
            if filled < k:
                filled += 1
    return idx, val


def _topk_rows_np(scores, k):
    m = scores.shape[1]
    if k == 1:
        idx = np.argmax(scores, axis=1)[:, None]    # first maximum, so the lower index wins
        return idx.astype(np.int64), np.take_along_axis(scores, idx, axis=1)
    cand = np.sort(np.argpartition(scores, m - k, axis=1)[:, m - k:], axis=1)
    vals = np.take_along_axis(scores, cand, axis=1)
    order = np.argsort(-vals, axis=1, kind="stable")
    idx = np.take_along_axis(cand, order, axis=1)
    # a tie at the k-th value may have let argpartition pick a higher index
    kth = np.take_along_axis(scores, idx[:, -1:], axis=1)
    tied = np.flatnonzero((scores >= kth).sum(axis=1) > k)
    if tied.size:
        idx[tied] = np.argsort(-scores[tied], axis=1, kind="stable")[:, :k]
    return idx.astype(np.int64), np.take_along_axis(scores, idx, axis=1)


@njit(cache=True, nogil=True)
def _topk_mean_nb(scores, k):
    q, m = scores.shape
    out = np.empty(q, dtype=np.float64)
    buf = np.empty(k, dtype=np.float64)
    for r in range(q):
        filled = 0
        for c in range(m):
            s = scores[r, c]
            if filled == k and not s > buf[k - 1]:
                continue
            p = filled if filled < k else k - 1
            while p > 0 and buf[p - 1] < s:
                buf[p] = buf[p - 1]
                p -= 1
            buf[p] = s
            if filled < k:
                filled += 1
        acc = 0.0
        for p in range(k):
            acc += buf[p]
        out[r] = acc / k
    return out


def _topk_mean_np(scores, k):
    m = scores.shape[1]
    part = np.partition(scores, m - k, axis=1)[:, m - k:]
    return part.mean(axis=1, dtype=np.float64)


def topk_rows(scores, k):
    """Top-``k`` column indices and values of every row, descending.

    Returns ``(indices, values)`` both shaped ``(rows, k)``.
    """
    scores = np.ascontiguousarray(scores)
    if not 1 <= k <= scores.shape[1]:
        raise ValueError(f"k={k} out of range for {scores.shape[1]} columns")
    if _use_numba:
        return _topk_rows_nb(scores, k)
    return _topk_rows_np(scores, k)


def topk_mean(scores, k):
    """Mean of the ``k`` largest values of every row."""
    scores = np.ascontiguousarray(scores)
    if not 1 <= k <= scores.shape[1]:
        raise ValueError(f"k={k} out of range for {scores.shape[1]} columns")
    if _use_numba:
        return _topk_mean_nb(scores, k)
    return _topk_mean_np(scores, k)
