"""End-to-end training runs and the bilingual baselines.

Any trained system is reduced to a pair table: for an ordered pair (s, t)
it holds encoders (A, B) such that ``X_s @ A.T`` and ``X_t @ B.T`` live in a
common space. A joint multilingual run gives ``(M_s, M_t)``. The pivot
baseline trains s->pivot and pivot->t bilingual systems and composes them.
The direct baseline trains one bilingual system per ordered pair.
"""
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ArgumentError
from .evaluation import word_translation_precision
from .mat import MappingSet, train_mat
from .mpsr import procrustes_solve, train_mpsr

logger = logging.getLogger(__name__)

MODES = ("multilingual", "pivot", "direct")


@dataclass
class TrainOutcome:
    mappings: MappingSet
    mat: object
    mpsr: object = None
    seconds: float = 0.0


def train_joint(spaces, mat_config, mpsr_config, target=0, skip_mpsr=False, keep_checkpoints=False):
    """MAT followed (unless skipped) by MPSR on all languages at once."""
    t0 = time.perf_counter()
    mat = train_mat(spaces, mat_config, target=target, keep_checkpoints=keep_checkpoints)
    mappings, mpsr = mat.mappings, None
    if not skip_mpsr:
        mpsr = train_mpsr(spaces, mappings, mpsr_config, keep_checkpoints=keep_checkpoints)
        mappings = mpsr.mappings
    return TrainOutcome(mappings, mat, mpsr, time.perf_counter() - t0)


@dataclass
class PairTable:
    langs: list
    encoders: dict = field(default_factory=dict)    # (s, t) -> (A, B)

    @classmethod
    def from_mappings(cls, mappings):
        n = len(mappings.langs)
        enc = {(s, t): (mappings.maps[s], mappings.maps[t]) for s in range(n) for t in range(n) if s != t}
        return cls(list(mappings.langs), enc)

    def pairs(self):
        return sorted(self.encoders)


def supervised_procrustes(spaces, dictionaries, target=0):
    """Closed-form mapping of every language onto ``target`` from training dictionaries.

    ``dictionaries[(l, target)]`` is an EvalDictionary; the first in-vocabulary
    gold target of each entry is paired with its source word.
    """
    dim = spaces[target].dim
    maps = [np.eye(dim) for _ in spaces]
    for l in range(len(spaces)):
        if l == target:
            continue
        d = dictionaries.get((l, target))
        if d is None:
            raise ArgumentError(f"no training dictionary for {spaces[l].lang}-{spaces[target].lang}")
        src, tgt = [], []
        for w, ts in d.entries.items():
            a = spaces[l].vocab.get(w)
            b = next((spaces[target].vocab.get(t) for t in sorted(ts) if t in spaces[target].vocab), None)
            if a is not None and b is not None:
                src.append(a)
                tgt.append(b)
        if not src:
            raise ArgumentError(f"training dictionary {spaces[l].lang}-{spaces[target].lang} has no usable pairs")
        maps[l] = procrustes_solve(spaces[l].matrix[src], spaces[target].matrix[tgt])
    return MappingSet([s.lang for s in spaces], target, maps)


def _bilingual(spaces, src, tgt, mat_config, mpsr_config, skip_mpsr, offset):
    """Train (src -> tgt) with tgt as the fixed space; returns the source encoder."""
    pair = [spaces[src], spaces[tgt]]
    mc = replace(mat_config, seed=mat_config.seed + offset)
    pc = replace(mpsr_config, seed=mpsr_config.seed + offset)
    out = train_joint(pair, mc, pc, target=1, skip_mpsr=skip_mpsr)
    return out.mappings.maps[0]


def bwe_cost(mode, n_langs):
    """Number of bilingual-system equivalents each mode trains."""
    return {"multilingual": n_langs - 1, "pivot": 2 * (n_langs - 1), "direct": n_langs * (n_langs - 1)}[mode]


@dataclass
class ComparisonResult:
    mode: str
    table: PairTable
    precision: dict    # (s, t) -> precision@1, empty without dictionaries
    cost_bwes: int
    seconds: float


def run_baseline_comparison(spaces, mode, mat_config, mpsr_config, pivot=0, skip_mpsr=False, dictionaries=None,
                            csls_n=10):
    """Train one of the three topologies and score every pair that has a dictionary.

    ``pivot`` is the pivot language for pivot mode and the shared target for
    multilingual mode. Bilingual runs use seed ``root + run index``.
    """
    if mode not in MODES:
        raise ArgumentError(f"mode must be one of {MODES}, got {mode!r}")
    n = len(spaces)
    if isinstance(pivot, str):
        codes = [s.lang for s in spaces]
        if pivot not in codes:
            raise ArgumentError(f"pivot language {pivot!r} not among {codes}")
        pivot = codes.index(pivot)
    if not 0 <= pivot < n:
        raise ArgumentError(f"pivot index {pivot} out of range")
    langs = [s.lang for s in spaces]
    dim = spaces[0].dim
    t0 = time.perf_counter()
    if mode == "multilingual":
        out = train_joint(spaces, mat_config, mpsr_config, target=pivot, skip_mpsr=skip_mpsr)
        table = PairTable.from_mappings(out.mappings)
    elif mode == "pivot":
        to_pivot, from_pivot = {pivot: np.eye(dim)}, {pivot: np.eye(dim)}
        run = 0
        for l in range(n):
            if l == pivot:
                continue
            to_pivot[l] = _bilingual(spaces, l, pivot, mat_config, mpsr_config, skip_mpsr, run)
            from_pivot[l] = _bilingual(spaces, pivot, l, mat_config, mpsr_config, skip_mpsr, run + 1)
            run += 2
        table = PairTable(langs)
        for s in range(n):
            for t in range(n):
                if s != t:
                    # s -> pivot space -> t space, compared against raw t
                    table.encoders[(s, t)] = (from_pivot[t] @ to_pivot[s], np.eye(dim))
    else:
        table = PairTable(langs)
        run = 0
        for s in range(n):
            for t in range(n):
                if s != t:
                    table.encoders[(s, t)] = (_bilingual(spaces, s, t, mat_config, mpsr_config, skip_mpsr, run),
                                              np.eye(dim))
                    run += 1
    seconds = time.perf_counter() - t0
    precision = {}
    if dictionaries:
        for (s, t), (a, b) in table.encoders.items():
            d = dictionaries.get((s, t))
            if d is not None:
                precision[(s, t)] = word_translation_precision(d, spaces[s], spaces[t], a, b, k_list=(1,),
                                                               csls_n=csls_n).precision[1]
    return ComparisonResult(mode, table, precision, bwe_cost(mode, n), seconds)
