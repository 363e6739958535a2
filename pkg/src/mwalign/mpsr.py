"""Multilingual pseudo-supervised refinement and orthogonal Procrustes.

Refinement alternates between inducing a lexicon for every ordered language
pair (mutual CSLS nearest neighbours among the most frequent words, mapped
into the shared space) and SGD on the mean squared distance between the
shared-space images of lexicon pairs.
"""
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .csls import DEFAULT_N, iter_csls_blocks
from .embeddings import frequent_slice
from .errors import ArgumentError, RefinementError, ShapeError
from .kernels import topk_rows
from .mat import TrainLogRecord, apply_mapping_grads
from .tensor import SgdState, mse_loss

logger = logging.getLogger(__name__)


@dataclass
class Lexicon:
    src_lang: str
    tgt_lang: str
    pairs: np.ndarray    # (p, 2) int64 rows of (source rank, target rank)

    def __post_init__(self):
        self.pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)

    def __len__(self):
        return len(self.pairs)

    def pair_set(self):
        return {(int(a), int(b)) for a, b in self.pairs}

    def transpose(self):
        p = self.pairs[:, ::-1]
        return Lexicon(self.tgt_lang, self.src_lang, p[np.lexsort((p[:, 1], p[:, 0]))])


@dataclass
class MpsrConfig:
    epochs: int = 5
    steps_per_epoch: int = 10000
    batch_size: int = 32
    lr: float = 0.1
    lr_decay: float = 0.98
    lr_shrink: float = 0.5
    min_lr: float = 1e-6
    lexicon_cutoff: int = 15000
    csls_n: int = DEFAULT_N
    reinduce_every_epoch: bool = True
    min_lexicon: int = 50
    beta: float = 0.001
    val_top_k: int = 10000
    seed: int = 0
    track_orthogonality: bool = False

    def __post_init__(self):
        for name in ("epochs", "steps_per_epoch", "batch_size", "lexicon_cutoff", "csls_n", "val_top_k"):
            if getattr(self, name) < 1:
                raise ArgumentError(f"{name} must be positive, got {getattr(self, name)}")
        if self.min_lexicon < 1:
            raise ArgumentError("min_lexicon must be positive")
        for name in ("lr", "beta"):
            if not getattr(self, name) > 0:
                raise ArgumentError(f"{name} must be positive")


def induce_lexicon(space_i, space_j, m_i, m_j, cutoff=15000, n=DEFAULT_N):
    """Mutual CSLS nearest neighbours between the top-``cutoff`` words of both spaces.

    Both pools are mapped into the shared space; CSLS penalties are taken
    within the pools. Ties resolve to the lower rank.
    """
    if cutoff < 1:
        raise ArgumentError(f"cutoff must be >= 1, got {cutoff}")
    a = np.asarray(frequent_slice(space_i, cutoff), dtype=np.float64) @ np.asarray(m_i).T
    b = np.asarray(frequent_slice(space_j, cutoff), dtype=np.float64) @ np.asarray(m_j).T
    lang_i = getattr(space_i, "lang", None)
    lang_j = getattr(space_j, "lang", None)
    if len(a) == 0 or len(b) == 0:
        return Lexicon(lang_i, lang_j, np.empty((0, 2)))
    n = min(n, len(a), len(b))
    fwd = np.empty(len(a), dtype=np.int64)
    best_col = np.full(len(b), -np.inf)
    bwd = np.zeros(len(b), dtype=np.int64)
    # row-wise argmax gives fwd; a running column max over blocks gives bwd
    for lo, hi, s in iter_csls_blocks(a, b, n=n):
        fwd[lo:hi] = topk_rows(s, 1)[0][:, 0]
        col_idx = np.argmax(s, axis=0)
        col_val = s[col_idx, np.arange(s.shape[1])]
        better = col_val > best_col
        best_col[better] = col_val[better]
        bwd[better] = col_idx[better] + lo
    rows = np.arange(len(a))
    keep = bwd[fwd] == rows
    return Lexicon(lang_i, lang_j, np.stack([rows[keep], fwd[keep]], axis=1))


def induce_all(spaces, mappings, cutoff, n):
    """Lexica for every ordered pair i != j; Lex(j, i) is the transpose of Lex(i, j)."""
    lex = {}
    for i in range(len(spaces)):
        for j in range(i + 1, len(spaces)):
            lex[(i, j)] = induce_lexicon(spaces[i], spaces[j], mappings.maps[i], mappings.maps[j], cutoff, n)
            lex[(j, i)] = lex[(i, j)].transpose()
    return lex


def mpsr_gradients(i, j, mappings, x_i, x_j):
    """Mean squared distance between ``M_i x_i`` and ``M_j x_j`` and its mapping gradients."""
    x_i = np.asarray(x_i, dtype=np.float64)
    x_j = np.asarray(x_j, dtype=np.float64)
    if x_i.shape != x_j.shape or x_i.shape[1] != mappings.dim:
        raise ShapeError(f"pair batches {x_i.shape}/{x_j.shape} vs mapping dim {mappings.dim}")
    t_i = x_i @ mappings.maps[i].T
    t_j = x_j @ mappings.maps[j].T
    loss, g_i, g_j = mse_loss(t_i, t_j)
    grads = {}
    if i != mappings.target:
        grads[i] = g_i.T @ x_i
    if j != mappings.target:
        gj = g_j.T @ x_j
        grads[j] = grads[j] + gj if j in grads else gj
    return loss, grads


def sample_pairs(space_i, space_j, lexicon, batch, rng):
    pick = lexicon.pairs[rng.integers(0, len(lexicon), size=batch)]
    return (np.asarray(space_i.matrix[pick[:, 0]], dtype=np.float64),
            np.asarray(space_j.matrix[pick[:, 1]], dtype=np.float64))


def mpsr_step(i, j, spaces, lexica, mappings, config, rng, lr=None):
    """One refinement update for the pair (i, j); returns the loss (0 for a skipped pair)."""
    lex = lexica.get((i, j))
    if lex is None or len(lex) == 0:
        logger.warning("empty lexicon for pair (%d, %d); skipped", i, j)
        return 0.0
    x_i, x_j = sample_pairs(spaces[i], spaces[j], lex, config.batch_size, rng)
    loss, grads = mpsr_gradients(i, j, mappings, x_i, x_j)
    apply_mapping_grads(mappings, grads, config.lr if lr is None else lr, config.beta)
    return loss


@dataclass
class MpsrResult:
    mappings: object
    log: list = field(default_factory=list)
    best_epoch: int = -1
    best_score: float = float("-inf")
    lexica: dict = field(default_factory=dict)
    max_residual: float = float("nan")
    checkpoints: list = field(default_factory=list)


def train_mpsr(spaces, mappings, config, validate=None, keep_checkpoints=False, on_epoch=None):
    """Refine ``mappings`` and return the best set by validation score (the input counts as epoch -1)."""
    from .validation import multilingual_validation

    n = len(spaces)
    if n < 2:
        raise ArgumentError("need at least two languages")
    if validate is None:
        def validate(m):
            return multilingual_validation(spaces, m, top_k=config.val_top_k, n=config.csls_n).overall

    rng = np.random.default_rng(config.seed)
    mappings = mappings.copy()
    opt = SgdState(config.lr, config.lr_decay, config.lr_shrink, config.min_lr)
    result = MpsrResult(mappings.copy())
    result.best_score = float(validate(mappings))
    result.log.append(TrainLogRecord(-1, 0, float("nan"), float("nan"), float("nan"), result.best_score,
                                     mappings.max_residual()))
    max_res = mappings.max_residual()
    lexica = None
    step = 0
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        if lexica is None or config.reinduce_every_epoch:
            lexica = induce_all(spaces, mappings, config.lexicon_cutoff, config.csls_n)
            sizes = {p: len(l) for p, l in lexica.items()}
            if not any(sizes.values()):
                raise RefinementError("every induced lexicon is empty; the input mappings are too poor to refine")
            small = [p for p, s in sizes.items() if s < config.min_lexicon]
            for p in small:
                logger.warning("lexicon %s has %d < %d pairs; pair skipped", p, sizes[p], config.min_lexicon)
            usable = {p: l for p, l in lexica.items() if p not in small}
            if not usable:
                raise RefinementError(f"no lexicon reaches the minimum size {config.min_lexicon}")
            result.lexica = lexica
        losses = []
        for _ in range(config.steps_per_epoch):
            step_loss = 0.0
            for i in range(n):
                j = int(rng.integers(n - 1))
                j += j >= i
                step_loss += mpsr_step(i, j, spaces, usable, mappings, config, rng, lr=opt.lr)
            losses.append(step_loss / n)
            step += 1
            if config.track_orthogonality:
                max_res = max(max_res, mappings.max_residual())
        score = float(validate(mappings))
        rec = TrainLogRecord(epoch, step, float("nan"), float(np.mean(losses)), float("nan"), score,
                             max_res if config.track_orthogonality else float("nan"))
        result.log.append(rec)
        logger.info("MPSR epoch %d: loss=%.6f val=%.5f lexicon=%d (%.1fs)", epoch, rec.m_loss, score,
                    int(np.mean([len(l) for l in usable.values()])), time.perf_counter() - t0)
        if keep_checkpoints:
            result.checkpoints.append((epoch, mappings.copy(), score))
        if on_epoch is not None:
            on_epoch(epoch, mappings.copy(), score)
        if score > result.best_score:
            result.best_score, result.best_epoch = score, epoch
            result.mappings = mappings.copy()
        else:
            opt.validation_dropped()
        opt.end_epoch()
    result.max_residual = max_res
    return result


def procrustes_solve(x, y):
    """Orthogonal W minimising ``||x @ W.T - y||_F`` for paired rows ``x``, ``y``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or x.shape != y.shape:
        raise ShapeError(f"paired rows must share a shape, got {x.shape} and {y.shape}")
    if x.shape[0] == 0:
        raise ArgumentError("need at least one pair")
    u, _, vt = np.linalg.svd(y.T @ x)
    return u @ vt


def write_lexicon_tsv(lexicon, space_i, space_j, path):
    with open(path, "w", encoding="utf-8") as f:
        for a, b in lexicon.pairs:
            f.write(f"{space_i.vocab.words[a]}\t{space_j.vocab.words[b]}\n")
