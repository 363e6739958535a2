"""Synthetic language families with a known alignment.

Every language is a noisy orthogonal transform of one shared latent matrix:
``space_l = latent @ R_l.T + sigma_l * noise``, so word rank r in one
language translates to rank r in every other, and the exact encoder of
language l into the space of language t is ``R_t @ R_l.T``.
"""
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import expm

from .embeddings import EmbeddingSpace, Vocabulary, write_text_embeddings
from .errors import ArgumentError, ShapeError
from .mat import MappingSet
from .tensor import random_orthogonal


@dataclass
class ClusterSpec:
    """Languages in ``members`` share an extra rotation of part of the vocabulary.

    A random ``fraction`` of the latent rows is rotated by one common
    rotation of magnitude ``strength`` before the per-language transforms,
    so cluster members stay exactly isomorphic to each other while those
    words drift relative to languages outside the cluster.
    """

    members: tuple
    strength: float
    fraction: float = 0.5


@dataclass
class SyntheticFamily:
    latent: np.ndarray
    rotations: list
    sigmas: list
    spaces: list
    seed: int
    clusters: list = field(default_factory=list)

    @property
    def langs(self):
        return [s.lang for s in self.spaces]

    @property
    def dim(self):
        return self.latent.shape[1]

    def true_mappings(self, target=0):
        rt = self.rotations[target]
        maps = [rt @ r.T for r in self.rotations]
        maps[target] = np.eye(self.dim)
        return MappingSet(self.langs, target, maps)

    def gold_dictionary(self, i, j):
        from .evaluation import EvalDictionary

        words = self.spaces[i].vocab.words
        return EvalDictionary(self.langs[i], self.langs[j], {w: {w} for w in words})

    def export(self, directory):
        """Write every language as ``<lang>.vec`` and gold pairs as ``<src>-<tgt>.txt``."""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        paths = {}
        for s in self.spaces:
            p = out / f"{s.lang}.vec"
            write_text_embeddings(p, s.vocab.words, s.matrix)
            paths[s.lang] = p
        for i, si in enumerate(self.spaces):
            for j, sj in enumerate(self.spaces):
                if i != j:
                    with open(out / f"{si.lang}-{sj.lang}.txt", "w", encoding="utf-8") as f:
                        for w in si.vocab.words:
                            f.write(f"{w} {w}\n")
        return paths


def bounded_rotation(d, scale, rng):
    """``expm(scale * A)`` for a random skew-symmetric A with unit-variance spectrum scale.

    Unlike a Haar sample this stays at a controlled distance from the
    identity; ``scale`` is roughly the typical rotation angle in radians.
    """
    g = rng.standard_normal((d, d)) / np.sqrt(d)
    return expm(scale * (g - g.T) / np.sqrt(2.0))


def _rotation(d, scale, rng):
    if scale is None:
        return random_orthogonal(d, rng)
    return bounded_rotation(d, scale, rng)


def clustered_latent(vocab, dim, rng, top=8, sub=8, spread=0.6, jitter=0.3):
    """Two-level Gaussian mixture: ``top`` centres, ``sub`` children each, word jitter around a child."""
    centres = rng.standard_normal((top, dim))
    children = (centres[:, None, :] + spread * rng.standard_normal((top, sub, dim))).reshape(top * sub, dim)
    label = rng.choice(top * sub, size=vocab, p=rng.dirichlet(np.ones(top * sub)))
    return children[label] + jitter * rng.standard_normal((vocab, dim))


def generate_family(n_langs, vocab, dim, sigma, seed, cluster_spec=None, rotation_scale=None, langs=None,
                    latent="gaussian"):
    """Build a family of ``n_langs`` synthetic languages.

    ``sigma`` is one noise level or one per language. ``rotation_scale=None``
    draws each R_l uniformly from the orthogonal group; a number draws it at
    that angular scale from the identity instead. ``cluster_spec`` is a
    ClusterSpec or a list of them. ``latent`` is ``"gaussian"`` (i.i.d. rows)
    or ``"clustered"`` (rows from a two-level mixture); rows are then scaled
    to unit norm either way.
    """
    if vocab < dim:
        raise ArgumentError(f"vocab ({vocab}) must be at least dim ({dim})")
    if n_langs < 1:
        raise ArgumentError("need at least one language")
    sigmas = list(np.broadcast_to(np.asarray(sigma, dtype=np.float64), (n_langs,)))
    langs = list(langs) if langs is not None else [f"l{i}" for i in range(n_langs)]
    if len(langs) != n_langs:
        raise ArgumentError("one language code per language")
    if cluster_spec is None:
        clusters = []
    elif isinstance(cluster_spec, ClusterSpec):
        clusters = [cluster_spec]
    else:
        clusters = list(cluster_spec)

    root = np.random.SeedSequence(seed)
    latent_ss, rot_ss, noise_ss, cluster_ss = root.spawn(4)
    lrng = np.random.default_rng(latent_ss)
    if latent == "gaussian":
        base = lrng.standard_normal((vocab, dim))
    elif latent == "clustered":
        base = clustered_latent(vocab, dim, lrng)
    else:
        raise ArgumentError(f"latent must be 'gaussian' or 'clustered', got {latent!r}")
    latent = base
    latent /= np.linalg.norm(latent, axis=1, keepdims=True)

    rot_rngs = [np.random.default_rng(s) for s in rot_ss.spawn(n_langs)]
    noise_rngs = [np.random.default_rng(s) for s in noise_ss.spawn(n_langs)]
    rotations = [_rotation(dim, rotation_scale, r) for r in rot_rngs]

    per_lang_latent = [latent] * n_langs
    for c, css in zip(clusters, cluster_ss.spawn(max(1, len(clusters)))):
        if c.strength == 0:
            continue
        crng = np.random.default_rng(css)
        moved = crng.random(vocab) < c.fraction
        shift = bounded_rotation(dim, c.strength, crng)
        for m in c.members:
            if not 0 <= m < n_langs:
                raise ArgumentError(f"cluster member {m} out of range")
            z = per_lang_latent[m].copy()
            z[moved] = z[moved] @ shift.T
            per_lang_latent[m] = z

    words = Vocabulary.from_words(f"w{r}" for r in range(vocab))
    spaces = []
    for l in range(n_langs):
        clean = per_lang_latent[l] @ rotations[l].T
        m = clean + sigmas[l] * noise_rngs[l].standard_normal(clean.shape) if sigmas[l] else clean
        spaces.append(EmbeddingSpace(langs[l], words, m))
    return SyntheticFamily(latent, rotations, sigmas, spaces, seed, clusters)


def gold_precision(family, mappings, k=1, csls_n=10, pairs=None):
    """Precision@k with the rank-identity dictionary for every ordered pair.

    Returns ``{(i, j): precision}``.
    """
    from .evaluation import word_translation_precision

    if mappings.dim != family.dim:
        raise ShapeError(f"mapping dim {mappings.dim} vs family dim {family.dim}")
    n = len(family.spaces)
    if pairs is None:
        pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    table = {}
    for i, j in pairs:
        res = word_translation_precision(
            family.gold_dictionary(i, j), family.spaces[i], family.spaces[j],
            mappings.maps[i], mappings.maps[j], k_list=(k,), csls_n=csls_n)
        table[(i, j)] = res.precision[k]
    return table
