"""Monolingual embedding sets in the word2vec text format."""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, IoError, ParseError, ShapeError

logger = logging.getLogger(__name__)

DEFAULT_MAX_VOCAB = 200000


@dataclass(frozen=True)
class Vocabulary:
    """Unique tokens in frequency order (rank 0 is the most frequent)."""

    words: tuple
    index: dict = field(repr=False, compare=False)

    @classmethod
    def from_words(cls, words):
        words = tuple(words)
        index = {w: r for r, w in enumerate(words)}
        if len(index) != len(words):
            raise ArgumentError("vocabulary contains duplicate tokens")
        return cls(words, index)

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.index

    def __getitem__(self, rank):
        return self.words[rank]

    def get(self, word, default=None):
        return self.index.get(word, default)


@dataclass(frozen=True, eq=False)
class EmbeddingSpace:
    lang: str
    vocab: Vocabulary
    matrix: np.ndarray

    def __post_init__(self):
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != len(self.vocab):
            raise ShapeError(f"matrix shape {m.shape} does not match vocabulary size {len(self.vocab)}")
        if not np.all(np.isfinite(m)):
            raise ArgumentError(f"{self.lang}: embedding matrix contains non-finite values")
        # immutable after construction
        if m.flags.writeable:
            m = m.view()
            m.flags.writeable = False
            object.__setattr__(self, "matrix", m)

    @classmethod
    def from_arrays(cls, lang, words, matrix):
        return cls(lang, Vocabulary.from_words(words), np.asarray(matrix))

    @property
    def dim(self):
        return self.matrix.shape[1]

    def __len__(self):
        return self.matrix.shape[0]

    def vector(self, word):
        return self.matrix[self.vocab.index[word]]


def frequent_slice(space, top_k):
    """View of the ``top_k`` most frequent rows (clamped at the vocab size)."""
    if top_k < 1:
        raise ArgumentError(f"top_k must be >= 1, got {top_k}")
    return space.matrix[: min(top_k, len(space))]


def load_text_embeddings(path, max_vocab=DEFAULT_MAX_VOCAB, lang=None, dtype=np.float32):
    """Read a word2vec-style text file.

    The first line is ``<count> <dim>``; every following line is a token and
    ``dim`` floats. Rows are kept in file order, which is taken to be
    frequency order. Repeated tokens keep their first vector and do not count
    toward ``max_vocab`` (``None`` means no limit).
    """
    if lang is None:
        lang = str(path)
    if max_vocab is not None and max_vocab < 1:
        raise ArgumentError(f"max_vocab must be positive, got {max_vocab}")
    limit = math.inf if max_vocab is None else max_vocab
    words, rows, seen = [], [], set()
    try:
        f = open(path, "r", encoding="utf-8", newline="\n")
    except OSError as exc:
        raise IoError(f"cannot open {path}: {exc}") from exc
    with f:
        header = f.readline()
        parts = header.split()
        if len(parts) != 2:
            raise ParseError("expected header '<count> <dim>'", path, 1)
        try:
            count, dim = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError("expected header '<count> <dim>'", path, 1) from None
        if dim <= 0 or count < 0:
            raise ParseError(f"invalid header values count={count} dim={dim}", path, 1)
        for lineno, line in enumerate(f, start=2):
            if len(words) >= limit:
                break
            fields = line.rstrip("\n").split()
            if not fields:
                continue
            if len(fields) != dim + 1:
                raise ParseError(f"expected {dim} values after the token, found {len(fields) - 1}", path, lineno)
            token = fields[0]
            if token in seen:
                logger.warning("%s:%d: duplicate token %r skipped", path, lineno, token)
                continue
            try:
                vec = np.array(fields[1:], dtype=np.float64)
            except ValueError:
                raise ParseError("non-numeric value in vector", path, lineno) from None
            if not np.all(np.isfinite(vec)):
                raise ParseError("non-finite value in vector", path, lineno)
            seen.add(token)
            words.append(token)
            rows.append(vec)
    if len(words) < min(count, limit):
        logger.warning("%s: header announces %d rows, read %d", path, count, len(words))
    matrix = np.array(rows, dtype=dtype).reshape(len(rows), dim)
    return EmbeddingSpace(lang, Vocabulary.from_words(words), matrix)


def format_row(token, values):
    return token + " " + " ".join(f"{v:.6g}" for v in values)


def write_text_embeddings(path, words, matrix):
    matrix = np.asarray(matrix)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(f"{matrix.shape[0]} {matrix.shape[1]}\n")
            for w, row in zip(words, matrix):
                f.write(format_row(w, row.tolist()))
                f.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def export_mapped_embeddings(space, mapping, path):
    """Write ``space`` mapped by ``mapping`` (rows become ``x @ mapping.T``)."""
    mapping = np.asarray(mapping)
    if mapping.shape != (space.dim, space.dim):
        raise ShapeError(f"mapping must be {space.dim}x{space.dim}, got {mapping.shape}")
    mapped = np.asarray(space.matrix, dtype=np.float64) @ mapping.T
    write_text_embeddings(path, space.vocab.words, mapped)
