"""Unsupervised model selection.

For an ordered pair (i, j) the score is the mean, over the most frequent
source words converted into language j, of the CSLS similarity to their
nearest neighbour among the most frequent j words. The multilingual score
is a weighted sum over all ordered pairs i != j (uniform by default).
"""
import csv
import io
from dataclasses import dataclass

import numpy as np

from .csls import DEFAULT_N, csls_topk
from .embeddings import frequent_slice
from .errors import ArgumentError

DEFAULT_TOP_K = 10000


@dataclass
class ValidationReport:
    langs: list
    pairs: dict      # (i, j) -> mean CSLS
    weights: dict    # (i, j) -> p_ij
    overall: float

    def rows(self):
        for (i, j) in sorted(self.pairs):
            yield self.langs[i], self.langs[j], self.weights[(i, j)], self.pairs[(i, j)]

    def to_text(self):
        lines = [f"{'src':<8}{'tgt':<8}{'weight':>10}{'mean_csls':>12}"]
        for s, t, w, v in self.rows():
            lines.append(f"{s:<8}{t:<8}{w:>10.4f}{v:>12.5f}")
        lines.append(f"{'overall':<16}{'':>10}{self.overall:>12.5f}")
        return "\n".join(lines)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["src", "tgt", "weight", "mean_csls"])
        for row in self.rows():
            w.writerow(row)
        w.writerow(["overall", "", "", self.overall])
        return buf.getvalue()


def mean_csls(space_i, space_j, m_i, m_j, top_k=DEFAULT_TOP_K, n=DEFAULT_N):
    """Mean CSLS of the top-k source words (converted into j) to their nearest j neighbour."""
    src = frequent_slice(space_i, top_k)
    tgt = np.asarray(frequent_slice(space_j, top_k), dtype=np.float64)
    if len(src) == 0 or len(tgt) == 0:
        raise ArgumentError("empty candidate pool")
    converted = np.asarray(src, dtype=np.float64) @ np.asarray(m_i).T @ np.asarray(m_j)
    n = min(n, len(src), len(tgt))
    best = csls_topk(converted, tgt, n=n, k=1).scores[:, 0]
    return float(best.mean())


def uniform_weights(n_langs):
    w = 1.0 / (n_langs * (n_langs - 1))
    return {(i, j): w for i in range(n_langs) for j in range(n_langs) if i != j}


def multilingual_validation(spaces, mappings, weights=None, top_k=DEFAULT_TOP_K, n=DEFAULT_N):
    """Weighted sum of pairwise ``mean_csls`` over all ordered pairs i != j.

    ``weights`` maps ``(i, j)`` to ``p_ij``; it must cover every ordered pair
    with non-negative values summing to 1.
    """
    n_langs = len(spaces)
    if n_langs < 2:
        raise ArgumentError("need at least two languages")
    pairs = [(i, j) for i in range(n_langs) for j in range(n_langs) if i != j]
    if weights is None:
        weights = uniform_weights(n_langs)
    else:
        weights = {tuple(k): float(v) for k, v in dict(weights).items()}
        if set(weights) != set(pairs):
            raise ArgumentError(f"weights must cover exactly the {len(pairs)} ordered pairs")
        if any(v < 0 for v in weights.values()):
            raise ArgumentError("weights must be non-negative")
        if abs(sum(weights.values()) - 1.0) > 1e-9:
            raise ArgumentError(f"weights sum to {sum(weights.values())}, expected 1")
    values = {}
    overall = 0.0
    for (i, j) in pairs:
        if weights[(i, j)] == 0:
            continue
        values[(i, j)] = mean_csls(spaces[i], spaces[j], mappings.maps[i], mappings.maps[j], top_k, n)
        overall += weights[(i, j)] * values[(i, j)]
    return ValidationReport([s.lang for s in spaces], values, weights, overall)
