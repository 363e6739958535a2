"""Multilingual adversarial training.

Every language l has a linear encoder M_l into the shared space (the space
of the target language, whose encoder is fixed to the identity) and a
discriminator D_l telling genuine l-embeddings from vectors converted into
l from some language i via ``x_i -> M_j^T M_i x_i``. In row-vector form a
batch ``X_i`` is converted with ``X_i @ M_i.T @ M_j``.

One outer step is ``k`` discriminator iterations (each touches every D_j,
pairing it with a random source language) followed by one mapping
iteration (every M_i, paired with a random decoder language), after which
all trainable mappings get the orthogonalization update.
"""
import csv
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ArgumentError, ShapeError
from .tensor import (
    SgdState,
    cross_entropy,
    init_mlp,
    mlp_backward,
    mlp_forward,
    orthogonality_residual,
    orthogonalize_update,
    random_orthogonal,
    sgd_step,
)

logger = logging.getLogger(__name__)


@dataclass
class MappingSet:
    """One d x d encoder per language; ``maps[target]`` is the identity."""

    langs: list
    target: int
    maps: list

    def __post_init__(self):
        if len(self.langs) != len(self.maps):
            raise ArgumentError("need one mapping per language")
        if not 0 <= self.target < len(self.langs):
            raise ArgumentError(f"target index {self.target} out of range")
        d = self.maps[0].shape[0]
        for m in self.maps:
            if m.shape != (d, d):
                raise ShapeError(f"mapping shape {m.shape}, expected {(d, d)}")

    @classmethod
    def identity(cls, langs, target, dim):
        return cls(list(langs), target, [np.eye(dim) for _ in langs])

    @property
    def dim(self):
        return self.maps[0].shape[0]

    def __len__(self):
        return len(self.langs)

    def index(self, lang):
        try:
            return self.langs.index(lang)
        except ValueError:
            raise ArgumentError(f"unknown language {lang!r}") from None

    def trainable(self):
        return [l for l in range(len(self.langs)) if l != self.target]

    def encode(self, l, x):
        """Rows of ``x`` (language ``l``) mapped into the shared space."""
        return np.asarray(x, dtype=np.float64) @ self.maps[l].T

    def convert(self, i, j, x):
        """Rows of language ``i`` encoded and decoded into language ``j``."""
        return np.asarray(x, dtype=np.float64) @ self.maps[i].T @ self.maps[j]

    def copy(self):
        return MappingSet(list(self.langs), self.target, [m.copy() for m in self.maps])

    def max_residual(self):
        return max(orthogonality_residual(self.maps[l]) for l in self.trainable()) if self.trainable() else 0.0


@dataclass
class MatConfig:
    k: int = 1
    batch_size: int = 32
    dis_lr: float = 0.1
    map_lr: float = 0.1
    epochs: int = 5
    steps_per_epoch: int = 10000
    dis_sample_cutoff: int = 75000
    smoothing: float = 0.1
    seed: int = 0
    dis_hidden: tuple = (2048, 2048)
    dis_dropout: float = 0.1
    dis_slope: float = 0.2
    beta: float = 0.001
    lr_decay: float = 0.98
    lr_shrink: float = 0.5
    min_lr: float = 1e-6
    val_top_k: int = 10000
    csls_n: int = 10
    init: str = "identity"
    track_orthogonality: bool = False

    def __post_init__(self):
        self.dis_hidden = tuple(int(h) for h in self.dis_hidden)
        for name in ("k", "batch_size", "epochs", "steps_per_epoch", "dis_sample_cutoff", "val_top_k", "csls_n"):
            if getattr(self, name) < 1:
                raise ArgumentError(f"{name} must be positive, got {getattr(self, name)}")
        if self.epochs < 1:
            raise ArgumentError("epochs must be positive")
        for name in ("dis_lr", "map_lr", "beta"):
            if not getattr(self, name) > 0:
                raise ArgumentError(f"{name} must be positive")
        if not 0 <= self.smoothing < 0.5:
            raise ArgumentError(f"smoothing must lie in [0, 0.5), got {self.smoothing}")
        if self.init not in ("identity", "random"):
            raise ArgumentError(f"init must be 'identity' or 'random', got {self.init!r}")


@dataclass
class TrainLogRecord:
    epoch: int
    step: int
    d_loss: float
    m_loss: float
    d_acc: float
    val_score: float = float("nan")
    max_residual: float = float("nan")


LOG_COLUMNS = ["epoch", "step", "d_loss", "m_loss", "d_acc", "val_score"]


def write_log_csv(records, path, columns=LOG_COLUMNS):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(columns)
        for r in records:
            row = asdict(r)
            w.writerow([row[c] for c in columns])


def sample_word_batch(space, cutoff, batch, rng):
    """``batch`` rows drawn uniformly (with replacement) from the ``cutoff`` most frequent words."""
    matrix = space.matrix if hasattr(space, "matrix") else np.asarray(space)
    if matrix.shape[0] == 0:
        raise ArgumentError("cannot sample from an empty vocabulary")
    hi = min(int(cutoff), matrix.shape[0])
    return np.asarray(matrix[rng.integers(0, hi, size=batch)], dtype=np.float64)


def discriminator_loss(disc, real, fake, smoothing, train_mode=False, rng=None):
    """Summed batch-mean cross entropies of D on real (label 1) and converted (label 0) rows.

    Returns ``(loss, grads, accuracy)``; ``grads`` is ``(weight_grads, bias_grads)``.
    """
    b_real, b_fake = len(real), len(fake)
    x = np.vstack([real, fake])
    y = np.concatenate([np.full(b_real, 1.0 - smoothing), np.full(b_fake, smoothing)])[:, None]
    prob, cache = mlp_forward(disc, x, train_mode=train_mode, rng=rng)
    losses, dlogit = cross_entropy(y, prob)
    scale = np.concatenate([np.full(b_real, 1.0 / b_real), np.full(b_fake, 1.0 / b_fake)])[:, None]
    loss = float(losses[:b_real].mean() + losses[b_real:].mean())
    gw, gb, _ = mlp_backward(disc, cache, dlogit * scale)
    acc = float(((prob[:b_real] >= 0.5).sum() + (prob[b_real:] < 0.5).sum()) / len(x))
    return loss, (gw, gb), acc


def discriminator_step(i, j, mappings, discriminators, x_i, x_j, config, rng=None, train_mode=True, lr=None):
    """Update D_j on real ``x_j`` against ``x_i`` converted from language ``i``.

    Mappings are only read; ``discriminators[j]`` is replaced by the updated
    parameters. ``lr`` overrides ``config.dis_lr``. Returns ``(loss, accuracy)``.
    """
    x_i = np.asarray(x_i, dtype=np.float64)
    x_j = np.asarray(x_j, dtype=np.float64)
    if x_i.shape[1] != mappings.dim or x_j.shape[1] != mappings.dim:
        raise ShapeError(f"batches of width {x_i.shape[1]}/{x_j.shape[1]} vs mapping dim {mappings.dim}")
    disc = discriminators[j]
    fake = mappings.convert(i, j, x_i)
    loss, (gw, gb), acc = discriminator_loss(
        disc, x_j, fake, config.smoothing, train_mode=train_mode and disc.input_dropout > 0, rng=rng)
    lr = config.dis_lr if lr is None else lr
    discriminators[j] = type(disc)(sgd_step(disc.weights, gw, lr), sgd_step(disc.biases, gb, lr),
                                   disc.slope, disc.input_dropout)
    return loss, acc


def mapping_gradients(i, j, mappings, discriminators, x_i):
    """Loss ``L(1, D_j(M_j^T M_i x_i))`` and its gradient for each trainable mapping involved.

    D_j runs in evaluation mode and its parameters are not touched.
    Returns ``(loss, {language index: gradient})``.
    """
    x_i = np.asarray(x_i, dtype=np.float64)
    if x_i.shape[1] != mappings.dim:
        raise ShapeError(f"batch width {x_i.shape[1]} vs mapping dim {mappings.dim}")
    m_i, m_j = mappings.maps[i], mappings.maps[j]
    shared = x_i @ m_i.T
    fake = shared @ m_j
    prob, cache = mlp_forward(discriminators[j], fake)
    losses, dlogit = cross_entropy(1.0, prob)
    _, _, g_fake = mlp_backward(discriminators[j], cache, dlogit / len(x_i))
    grads = {}
    if j != mappings.target:
        grads[j] = shared.T @ g_fake
    if i != mappings.target:
        g_i = (g_fake @ m_j.T).T @ x_i
        grads[i] = grads[i] + g_i if i in grads else g_i
    return float(losses.mean()), grads


def apply_mapping_grads(mappings, grads, lr, beta):
    """SGD on every mapping with a gradient, then orthogonalize all trainable ones."""
    for l, g in grads.items():
        if l == mappings.target:
            continue
        mappings.maps[l] = sgd_step(mappings.maps[l], g, lr)
    for l in mappings.trainable():
        mappings.maps[l] = orthogonalize_update(mappings.maps[l], beta)


def mapping_step(i, j, mappings, discriminators, x_i, config):
    """One mapping update for the pair (i, j); returns the adversarial loss."""
    loss, grads = mapping_gradients(i, j, mappings, discriminators, x_i)
    apply_mapping_grads(mappings, grads, config.map_lr, config.beta)
    return loss


def init_discriminators(n_langs, dim, config, rng):
    # zero output layer: every D starts at p=0.5, so early mapping gradients are exactly zero
    return [init_mlp(dim, config.dis_hidden, rng=rng, slope=config.dis_slope, input_dropout=config.dis_dropout,
                     zero_output=True) for _ in range(n_langs)]


def init_mappings(langs, target, dim, config, rng):
    mappings = MappingSet.identity(langs, target, dim)
    if config.init == "random":
        for l in mappings.trainable():
            mappings.maps[l] = random_orthogonal(dim, rng)
    return mappings


@dataclass
class MatResult:
    mappings: MappingSet
    discriminators: list
    log: list = field(default_factory=list)
    best_epoch: int = -1
    best_score: float = float("-inf")
    max_residual: float = float("nan")
    checkpoints: list = field(default_factory=list)


def train_mat(spaces, config, target=0, validate=None, keep_checkpoints=False, on_epoch=None):
    """Run adversarial training and return the best mappings by validation score.

    ``validate(mappings) -> float`` defaults to the unsupervised multilingual
    criterion. ``on_epoch(epoch, mappings, score)`` is called after each
    epoch with a snapshot.
    """
    from .validation import multilingual_validation

    n = len(spaces)
    if n < 2:
        raise ArgumentError("need at least two languages")
    dims = {s.dim for s in spaces}
    if len(dims) != 1:
        raise ArgumentError(f"embedding dimensions differ: {sorted(dims)}")
    dim = dims.pop()
    if validate is None:
        def validate(m):
            return multilingual_validation(spaces, m, top_k=config.val_top_k, n=config.csls_n).overall

    rng = np.random.default_rng(config.seed)
    langs = [s.lang for s in spaces]
    mappings = init_mappings(langs, target, dim, config, rng)
    discs = init_discriminators(n, dim, config, rng)
    dis_opt = SgdState(config.dis_lr, config.lr_decay, config.lr_shrink, config.min_lr)
    map_opt = SgdState(config.map_lr, config.lr_decay, config.lr_shrink, config.min_lr)

    result = MatResult(mappings.copy(), discs)
    max_res = mappings.max_residual()
    step = 0
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        d_losses, m_losses, d_accs = [], [], []
        for _ in range(config.steps_per_epoch):
            for _ in range(config.k):
                for j in range(n):
                    i = int(rng.integers(n))
                    x_i = sample_word_batch(spaces[i], config.dis_sample_cutoff, config.batch_size, rng)
                    x_j = sample_word_batch(spaces[j], config.dis_sample_cutoff, config.batch_size, rng)
                    loss, acc = discriminator_step(i, j, mappings, discs, x_i, x_j, config, rng, lr=dis_opt.lr)
                    d_losses.append(loss)
                    d_accs.append(acc)
            grads, m_loss = {}, 0.0
            for i in range(n):
                j = int(rng.integers(n))
                x_i = sample_word_batch(spaces[i], config.dis_sample_cutoff, config.batch_size, rng)
                loss, g = mapping_gradients(i, j, mappings, discs, x_i)
                m_loss += loss
                for l, gl in g.items():
                    grads[l] = grads[l] + gl if l in grads else gl
            apply_mapping_grads(mappings, grads, map_opt.lr, config.beta)
            m_losses.append(m_loss / n)
            step += 1
            if config.track_orthogonality:
                max_res = max(max_res, mappings.max_residual())
        score = float(validate(mappings))
        rec = TrainLogRecord(epoch, step, float(np.mean(d_losses)), float(np.mean(m_losses)),
                             float(np.mean(d_accs)), score, max_res if config.track_orthogonality else float("nan"))
        result.log.append(rec)
        logger.info("MAT epoch %d: d_loss=%.4f m_loss=%.4f d_acc=%.3f val=%.5f (%.1fs)",
                    epoch, rec.d_loss, rec.m_loss, rec.d_acc, score, time.perf_counter() - t0)
        if keep_checkpoints:
            result.checkpoints.append((epoch, mappings.copy(), score))
        if on_epoch is not None:
            on_epoch(epoch, mappings.copy(), score)
        if score > result.best_score:
            result.best_score, result.best_epoch = score, epoch
            result.mappings = mappings.copy()
        else:
            map_opt.validation_dropped()
        dis_opt.end_epoch()
        map_opt.end_epoch()
    result.discriminators = discs
    result.max_residual = max_res
    return result
