import numpy as np
import pytest

from mwalign.csls import cosine_topk, csls_scores, csls_topk, mean_topk_cosine
from mwalign.errors import ArgumentError

import oracles


def test_cosine_topk_identity():
    r = cosine_topk(np.eye(3), np.eye(3), 1)
    assert r.indices[:, 0].tolist() == [0, 1, 2]
    np.testing.assert_allclose(r.scores[:, 0], 1.0)


def test_cosine_topk_hand():
    r = cosine_topk([[1.0, 0.0]], [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]], 2)
    assert r.indices.tolist() == [[0, 1]]
    np.testing.assert_allclose(r.scores, [[1.0, 0.0]], atol=1e-15)


def test_cosine_topk_bruteforce():
    rng = np.random.default_rng(0)
    X, Y = rng.standard_normal((100, 6)), rng.standard_normal((50, 6))
    r = cosine_topk(X, Y, 5, block_size=17)
    C = oracles.cos_matrix(oracles.as_lists(X), oracles.as_lists(Y))
    for q in range(100):
        assert r.indices[q].tolist() == oracles.ranked(C[q], 5)
        np.testing.assert_allclose(r.scores[q], [C[q][j] for j in r.indices[q]], atol=1e-12)


def test_cosine_topk_k_too_large():
    with pytest.raises(ArgumentError):
        cosine_topk(np.eye(2), np.eye(2), 3)


def test_zero_rows_score_zero():
    r = cosine_topk([[0.0, 0.0]], [[1.0, 0.0], [0.0, 1.0]], 2)
    assert r.scores.tolist() == [[0.0, 0.0]]


def test_mean_topk_cosine():
    assert mean_topk_cosine([[1.0, 0.0]], [[1.0, 0.0], [0.0, 3.0]], 1)[0] == pytest.approx(1.0)
    assert mean_topk_cosine([[1.0, 0.0]], [[1.0, 0.0], [0.0, 1.0]], 2)[0] == pytest.approx(0.5)
    rng = np.random.default_rng(1)
    P, O = rng.standard_normal((50, 5)), rng.standard_normal((20, 5))
    C = oracles.cos_matrix(oracles.as_lists(P), oracles.as_lists(O))
    np.testing.assert_allclose(mean_topk_cosine(P, O, 4), [oracles.topk_mean(row, 4) for row in C], atol=1e-12)
    with pytest.raises(ArgumentError):
        mean_topk_cosine(P, O, 21)


def test_csls_hand_values():
    S = csls_scores([[1.0, 0.0]], [[1.0, 0.0], [0.0, 1.0]], n=1)
    assert S[0, 0] == 0.0
    assert S[0, 1] == -1.0
    same = np.tile([[0.3, -0.2, 0.9]], (4, 1))
    assert np.all(csls_scores(same, same * 2.0, n=2) == 0.0)


def test_csls_topk_hand():
    r = csls_topk([[1.0, 0.0]], [[1.0, 0.0], [0.0, 1.0]], n=1, k=2)
    assert r.indices.tolist() == [[0, 1]]


def test_csls_identical_spaces_retrieve_self():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((40, 8))
    assert csls_topk(X, X, n=5, k=1).indices[:, 0].tolist() == list(range(40))


def test_csls_penalty_length_checked():
    with pytest.raises(ArgumentError):
        csls_scores(np.eye(3), np.eye(3), n=1, r_queries=np.zeros(2))


def test_csls_precomputed_penalties_equal():
    rng = np.random.default_rng(3)
    X, Y = rng.standard_normal((30, 4)), rng.standard_normal((25, 4))
    rq, rk = mean_topk_cosine(X, Y, 3), mean_topk_cosine(Y, X, 3)
    np.testing.assert_array_equal(csls_scores(X, Y, 3), csls_scores(X, Y, 3, rq, rk))


@pytest.mark.parametrize("trial", range(5))
def test_csls_bruteforce(trial):
    rng = np.random.default_rng(10 + trial)
    X, Y = rng.standard_normal((60, 7)), rng.standard_normal((60, 7))
    ref = oracles.csls(oracles.as_lists(X), oracles.as_lists(Y), 10)
    S = csls_scores(X, Y, 10, block_size=13)
    assert np.max(np.abs(S - np.array(ref))) < 1e-10
    r = csls_topk(X, Y, 10, k=3, block_size=13)
    for q in range(60):
        assert r.indices[q].tolist() == oracles.ranked(ref[q], 3)


def test_block_size_independence():
    rng = np.random.default_rng(4)
    X, Y = rng.standard_normal((64, 5)), rng.standard_normal((50, 5))
    ref = csls_topk(X, Y, 5, k=4, block_size=50)
    for bs in (1, 7, 64):
        r = csls_topk(X, Y, 5, k=4, block_size=bs)
        np.testing.assert_array_equal(r.indices, ref.indices)
        np.testing.assert_allclose(r.scores, ref.scores, rtol=0, atol=1e-13)


def test_rank_equivalence_per_query():
    rng = np.random.default_rng(5)
    X, Y = rng.standard_normal((10, 4)), rng.standard_normal((30, 4))
    S = csls_scores(X, Y, 3)
    rk = mean_topk_cosine(Y, X, 3)
    C = np.array(oracles.cos_matrix(oracles.as_lists(X), oracles.as_lists(Y)))
    for q in range(10):
        np.testing.assert_array_equal(np.argsort(-S[q], kind="stable"), np.argsort(-(2 * C[q] - rk), kind="stable"))


def test_scale_invariance():
    rng = np.random.default_rng(6)
    X, Y = rng.standard_normal((20, 4)), rng.standard_normal((20, 4))
    Y2 = Y.copy()
    Y2[3] *= 17.5
    assert np.max(np.abs(csls_scores(X, Y, 4) - csls_scores(X, Y2, 4))) < 1e-10


def test_symmetry():
    rng = np.random.default_rng(7)
    X, Y = rng.standard_normal((15, 4)), rng.standard_normal((22, 4))
    assert np.max(np.abs(csls_scores(X, Y, 3) - csls_scores(Y, X, 3).T)) < 1e-12
