"""Dense numerics used by the trainers.

A small feed-forward classifier with hand-written backprop, the two losses,
plain SGD, and the orthogonalization step for the linear mappings. Arrays
are plain numpy; everything is a function of its arguments.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, ShapeError

PROB_EPS = 1e-7


def matmul(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def orthogonalize_update(m, beta=0.001):
    """One step of ``(1 + beta) M - beta M M^T M`` toward the orthogonal manifold."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"orthogonalize_update needs a square matrix, got {m.shape}")
    # same as (1 + beta) M - beta M M^T M, but exact when M is orthogonal
    return m + beta * (m - m @ (m.T @ m))


def orthogonality_residual(m):
    """max |M^T M - I|."""
    m = np.asarray(m)
    return float(np.max(np.abs(m.T @ m - np.eye(m.shape[1]))))


def random_orthogonal(d, seed):
    """Haar-distributed orthogonal matrix from the QR of a seeded Gaussian."""
    if d < 1:
        raise ArgumentError(f"dimension must be >= 1, got {d}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def sigmoid(z):
    # split by sign so exp never overflows
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def cross_entropy(y, p):
    """Binary cross entropy and its gradient w.r.t. the pre-sigmoid logit.

    ``y`` may be a hard label or a smoothed target in [0, 1]. Works
    elementwise on arrays; ``p`` is clamped to ``[eps, 1 - eps]``.
    """
    y = np.asarray(y, dtype=np.float64)
    p = np.clip(np.asarray(p, dtype=np.float64), PROB_EPS, 1.0 - PROB_EPS)
    loss = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    return loss, p - y


def mse_loss(a, b):
    """Mean of ``(a - b)**2`` over every entry, with gradients for both sides."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"mse_loss shape mismatch {a.shape} vs {b.shape}")
    diff = a - b
    loss = float(np.mean(diff * diff))
    ga = 2.0 * diff / diff.size
    return loss, ga, -ga


@dataclass
class MlpParams:
    """Feed-forward binary classifier; the last layer has one output unit."""

    weights: list
    biases: list
    slope: float = 0.2
    input_dropout: float = 0.1

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ShapeError("need one bias per weight matrix and at least one layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ShapeError(f"layer {i}: weight {w.shape} / bias {b.shape}")
            if i and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ShapeError(f"layer {i} input {w.shape[0]} != previous output {self.weights[i - 1].shape[1]}")
        if self.weights[-1].shape[1] != 1:
            raise ShapeError("final layer must have a single output")

    @property
    def input_dim(self):
        return self.weights[0].shape[0]

    def arrays(self):
        return self.weights + self.biases

    def copy(self):
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                         self.slope, self.input_dropout)


def init_mlp(input_dim, hidden=(2048, 2048), rng=None, slope=0.2, input_dropout=0.1, zero_output=False):
    """Kaiming-uniform style init (the torch ``nn.Linear`` default)."""
    rng = np.random.default_rng(rng)
    dims = [input_dim, *hidden, 1]
    ws, bs = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        ws.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        bs.append(rng.uniform(-bound, bound, size=fan_out))
    if zero_output:
        ws[-1][:] = 0.0
        bs[-1][:] = 0.0
    return MlpParams(ws, bs, slope, input_dropout)


@dataclass
class MlpCache:
    inputs: list = field(default_factory=list)   # input to each layer
    preacts: list = field(default_factory=list)  # pre-activation of each hidden layer
    mask: np.ndarray = None                      # input dropout mask (scaled), or None
    logits: np.ndarray = None


def mlp_forward(params, x, train_mode=False, rng=None):
    """Return ``(probabilities (batch, 1), cache)``.

    Input dropout is applied only when ``train_mode`` is set; it then needs
    ``rng``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.input_dim:
        raise ShapeError(f"expected (batch, {params.input_dim}) input, got {x.shape}")
    cache = MlpCache()
    h = x
    if train_mode and params.input_dropout > 0:
        if rng is None:
            raise ArgumentError("train_mode forward needs an rng for dropout")
        keep = 1.0 - params.input_dropout
        cache.mask = (rng.random(x.shape) < keep) / keep
        h = h * cache.mask
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        cache.inputs.append(h)
        z = h @ w + b
        if i < last:
            cache.preacts.append(z)
            h = np.where(z > 0, z, params.slope * z)
        else:
            cache.logits = z
    return sigmoid(cache.logits), cache


def mlp_backward(params, cache, dlogit):
    """Backprop ``d loss / d logit`` (shape (batch, 1)).

    Returns ``(weight_grads, bias_grads, input_grad)``.
    """
    dlogit = np.asarray(dlogit, dtype=np.float64)
    if cache.logits is None or len(cache.inputs) != len(params.weights):
        raise ShapeError("cache does not come from a forward pass of these params")
    if dlogit.shape != cache.logits.shape:
        raise ShapeError(f"upstream gradient {dlogit.shape} vs logits {cache.logits.shape}")
    n = len(params.weights)
    gw, gb = [None] * n, [None] * n
    g = dlogit
    for i in range(n - 1, -1, -1):
        w = params.weights[i]
        h = cache.inputs[i]
        if h.shape[1] != w.shape[0]:
            raise ShapeError("stale cache")
        gw[i] = h.T @ g
        gb[i] = g.sum(axis=0)
        g = g @ w.T
        if i > 0:
            z = cache.preacts[i - 1]
            g = g * np.where(z > 0, 1.0, params.slope)
    if cache.mask is not None:
        g = g * cache.mask
    return gw, gb, g


@dataclass
class SgdState:
    lr: float = 0.1
    decay: float = 0.98
    shrink: float = 0.5
    min_lr: float = 1e-6

    def __post_init__(self):
        if not self.lr > 0:
            raise ArgumentError(f"learning rate must be positive, got {self.lr}")
        if not 0 < self.decay <= 1 or not 0 < self.shrink <= 1:
            raise ArgumentError("decay and shrink must lie in (0, 1]")

    def end_epoch(self):
        self.lr = max(self.min_lr, self.lr * self.decay)

    def validation_dropped(self):
        self.lr = max(self.min_lr, self.lr * self.shrink)


def sgd_step(values, grads, state):
    """``theta - lr * grad`` for one array or a list of arrays (new arrays)."""
    lr = state.lr if isinstance(state, SgdState) else float(state)
    if isinstance(values, np.ndarray):
        if np.shape(grads) != values.shape:
            raise ShapeError(f"gradient {np.shape(grads)} vs parameter {values.shape}")
        return values - lr * grads
    if len(values) != len(grads):
        raise ShapeError("parameter and gradient lists differ in length")
    out = []
    for v, g in zip(values, grads):
        if np.shape(g) != np.shape(v):
            raise ShapeError(f"gradient {np.shape(g)} vs parameter {np.shape(v)}")
        out.append(v - lr * g)
    return out
