"""Supervised evaluation: word translation and cross-lingual word similarity.

Translation retrieval ranks every target word by CSLS in the shared space,
with both hubness penalties taken over the full loaded vocabularies.
Out-of-vocabulary entries are skipped and reported through ``coverage``.
"""
import csv
import io
import logging
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .csls import DEFAULT_N, csls_topk, mean_topk_cosine, normalize_rows
from .errors import EvalError, ParseError

logger = logging.getLogger(__name__)


@dataclass
class EvalDictionary:
    src_lang: str
    tgt_lang: str
    entries: dict    # source word -> set of acceptable targets

    def __post_init__(self):
        if not self.entries:
            raise EvalError("dictionary has no entries")
        if any(not t for t in self.entries.values()):
            raise EvalError("every dictionary entry needs at least one target")

    def __len__(self):
        return len(self.entries)


def load_dictionary(path, src_lang=None, tgt_lang=None):
    """Read ``src tgt`` pairs, one per line; repeated sources merge their targets."""
    entries = OrderedDict()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise ParseError(f"expected 'src tgt', got {len(parts)} fields", path, lineno)
            entries.setdefault(parts[0], set()).add(parts[1])
    if not entries:
        raise ParseError("dictionary is empty", path, None)
    return EvalDictionary(src_lang, tgt_lang, dict(entries))


@dataclass
class SimilarityDataset:
    lang1: str
    lang2: str
    items: list    # (word1, word2, score)

    def __post_init__(self):
        seen = set()
        for w1, w2, s in self.items:
            if not np.isfinite(s):
                raise EvalError(f"non-finite score for ({w1}, {w2})")
            if (w1, w2) in seen:
                raise EvalError(f"duplicate pair ({w1}, {w2})")
            seen.add((w1, w2))


def load_similarity(path, lang1=None, lang2=None):
    """Read ``word1<TAB>word2<TAB>score`` lines."""
    items = []
    seen = set()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(f"expected 3 tab-separated fields, got {len(parts)}", path, lineno)
            try:
                score = float(parts[2])
            except ValueError:
                raise ParseError(f"bad score {parts[2]!r}", path, lineno) from None
            if not np.isfinite(score):
                raise ParseError("non-finite score", path, lineno)
            if (parts[0], parts[1]) in seen:
                raise ParseError(f"duplicate pair ({parts[0]}, {parts[1]})", path, lineno)
            seen.add((parts[0], parts[1]))
            items.append((parts[0], parts[1], score))
    if not items:
        raise ParseError("similarity file is empty", path, None)
    return SimilarityDataset(lang1, lang2, items)


@dataclass
class PrecisionResult:
    precision: dict      # k -> fraction of evaluated sources with a hit in the top k
    hits: dict           # k -> hit count
    evaluated: int
    total: int
    predictions: dict = field(default_factory=dict)   # source word -> ranked target indices

    @property
    def coverage(self):
        return self.evaluated / self.total if self.total else 0.0


def shared_space(space, mapping):
    return np.asarray(space.matrix, dtype=np.float64) @ np.asarray(mapping, dtype=np.float64).T


def translation_predictions(src_shared, tgt_shared, query_rows, k, n=DEFAULT_N):
    """Top-k CSLS target rows for the given source rows; penalties use the full spaces."""
    src_u = normalize_rows(src_shared)
    tgt_u = normalize_rows(tgt_shared)
    n = min(n, len(src_u), len(tgt_u))
    queries = src_u[query_rows]
    r_q = mean_topk_cosine(queries, tgt_u, n)
    r_k = mean_topk_cosine(tgt_u, src_u, n)
    return csls_topk(queries, tgt_u, n=n, k=k, r_queries=r_q, r_keys=r_k)


def word_translation_precision(dictionary, space_src, space_tgt, m_src, m_tgt, k_list=(1, 5), csls_n=DEFAULT_N,
                               keep_predictions=False):
    k_list = sorted(set(int(k) for k in k_list))
    if not k_list or k_list[0] < 1:
        raise EvalError(f"invalid k list {k_list}")
    queries, gold = [], []
    for word, targets in dictionary.entries.items():
        row = space_src.vocab.get(word)
        tset = {space_tgt.vocab.index[t] for t in targets if t in space_tgt.vocab}
        if row is None or not tset:
            continue
        queries.append(row)
        gold.append(tset)
    total = len(dictionary.entries)
    if not queries:
        raise EvalError(f"no evaluable entries among {total} ({dictionary.src_lang}->{dictionary.tgt_lang})")
    kmax = min(k_list[-1], len(space_tgt))
    res = translation_predictions(shared_space(space_src, m_src), shared_space(space_tgt, m_tgt),
                                  np.asarray(queries), kmax, csls_n)
    hits = {}
    for k in k_list:
        top = res.indices[:, :min(k, kmax)]
        hits[k] = sum(1 for q, tset in enumerate(gold) if tset.intersection(top[q].tolist()))
    preds = {}
    if keep_predictions:
        words = space_src.vocab.words
        preds = {words[r]: res.indices[q] for q, r in enumerate(queries)}
    return PrecisionResult({k: hits[k] / len(queries) for k in k_list}, hits, len(queries), total, preds)


def spearman_rho(pred, gold):
    """Spearman rank correlation with average ranks for ties."""
    pred = np.asarray(pred, dtype=np.float64)
    gold = np.asarray(gold, dtype=np.float64)
    if pred.shape != gold.shape or pred.ndim != 1:
        raise EvalError(f"shape mismatch {pred.shape} vs {gold.shape}")
    if len(pred) < 2:
        raise EvalError("need at least two values")
    if np.isnan(pred).any() or np.isnan(gold).any():
        raise EvalError("NaN in input")
    ra = rankdata(pred) - (len(pred) + 1) / 2
    rb = rankdata(gold) - (len(gold) + 1) / 2
    den = np.sqrt((ra @ ra) * (rb @ rb))
    if den == 0:
        raise EvalError("constant input has no rank variance")
    return float(np.clip((ra @ rb) / den, -1.0, 1.0))


@dataclass
class ClwsResult:
    rho: float
    evaluated: int
    total: int

    @property
    def coverage(self):
        return self.evaluated / self.total if self.total else 0.0


def evaluate_clws(dataset, space1, space2, m1, m2):
    """Spearman correlation between gold scores and cosine of the mapped words."""
    pred, gold = [], []
    for w1, w2, score in dataset.items:
        if w1 not in space1.vocab or w2 not in space2.vocab:
            continue
        a = np.asarray(space1.vector(w1), dtype=np.float64) @ np.asarray(m1).T
        b = np.asarray(space2.vector(w2), dtype=np.float64) @ np.asarray(m2).T
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        pred.append(float(a @ b / (na * nb)) if na and nb else 0.0)
        gold.append(score)
    if len(pred) < 2:
        raise EvalError(f"only {len(pred)} of {len(dataset.items)} pairs in vocabulary")
    return ClwsResult(spearman_rho(pred, gold), len(pred), len(dataset.items))


def summary_rows(langs, table):
    """Single-source, single-target and overall macro averages of ``{(src, tgt): p}``."""
    single_source = {}
    single_target = {}
    for l in langs:
        out = [v for (s, t), v in table.items() if s == l]
        inc = [v for (s, t), v in table.items() if t == l]
        single_source[l] = float(np.mean(out)) if out else float("nan")
        single_target[l] = float(np.mean(inc)) if inc else float("nan")
    overall = float(np.mean(list(table.values()))) if table else float("nan")
    return single_source, single_target, overall


def precision_table_text(langs, table, scale=100.0):
    """Source-by-target grid plus summary rows; missing pairs print as '-'."""
    width = max(8, max(len(l) for l in langs) + 2)
    first = 15
    head = f"{'src/tgt':<{first}}" + "".join(f"{l:>{width}}" for l in langs) + f"{'Single Source':>15}"
    lines = [head]
    src_avg, tgt_avg, overall = summary_rows(langs, table)
    for s in langs:
        cells = []
        for t in langs:
            v = table.get((s, t))
            cells.append(f"{'-':>{width}}" if v is None else f"{v * scale:>{width}.1f}")
        lines.append(f"{s:<{first}}" + "".join(cells) + f"{src_avg[s] * scale:>15.1f}")
    lines.append(f"{'Single Target':<{first}}" + "".join(f"{tgt_avg[t] * scale:>{width}.1f}" for t in langs))
    lines.append(f"{'Overall':<{first}}{overall * scale:>{width}.1f}")
    return "\n".join(lines)


def precision_table_csv(table, coverage=None):
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["src", "tgt", "precision_at_1", "coverage"])
    for (s, t) in sorted(table):
        w.writerow([s, t, f"{table[(s, t)]:.6f}", "" if coverage is None else f"{coverage[(s, t)]:.6f}"])
    return buf.getvalue()
