import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from stggm.errors import NonConvergence, SingularCovariance
from stggm.evaluate import (
    auc,
    bic_select,
    fit_precision_given_structure,
    partial_auc,
    pooled_roc,
    roc_curve,
    roc_from_vectors,
    top_k_edges,
)
from stggm.simulate import gen_precision, gen_random_graph, sample_mvn


def _truth(p=8, seed=0):
    return gen_random_graph(p, 0.3, np.random.default_rng(seed))


def test_perfect_scores():
    g = _truth()
    c = roc_curve(g.astype(float), g)
    assert c.tp[0] == c.n_pos and c.fp[0] == 0
    assert partial_auc(c, c.n_pos) == 1.0
    assert auc(c) == 1.0


def test_constant_scores():
    g = _truth()
    c = roc_curve(np.full(g.shape, 0.3), g)
    assert len(c.thresholds) == 1
    assert (c.tp[0], c.fp[0]) == (c.n_pos, c.n_neg)
    # a straight line from the origin to (n_neg, n_pos)
    F = 5.0
    assert partial_auc(c, F) == pytest.approx(F / (2 * c.n_neg))
    F = c.n_neg + 10.0
    area = 0.5 * c.n_neg * c.n_pos + c.n_pos * 10.0
    assert partial_auc(c, F) == pytest.approx(area / (c.n_pos * F))


def test_hand_example():
    c = roc_from_vectors([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0])
    assert c.points() == [(0.9, 1, 0), (0.8, 1, 1), (0.7, 2, 1), (0.6, 2, 2)]
    assert partial_auc(c, 1) == pytest.approx(0.5)
    assert partial_auc(c, 2) == pytest.approx(0.75) == auc(c)
    assert partial_auc(c, 0.5) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        partial_auc(c, 0)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.booleans()), min_size=2, max_size=40))
def test_auc_equals_mann_whitney(data):
    s = np.array([d[0] for d in data], float)
    y = np.array([d[1] for d in data])
    if y.all() or not y.any():
        return
    u = stats.mannwhitneyu(s[y], s[~y]).statistic
    assert auc(roc_from_vectors(s, y)) == pytest.approx(u / (y.sum() * (~y).sum()))


def test_random_scores_average_half():
    rng = np.random.default_rng(0)
    g = _truth(12)
    vals = [auc(roc_curve(rng.random(g.shape), g)) for _ in range(400)]
    assert abs(np.mean(vals) - 0.5) < 4 * np.std(vals) / np.sqrt(len(vals))


def test_pooled_roc_concatenates():
    g1, g2 = _truth(6, 1), _truth(6, 2)
    rng = np.random.default_rng(3)
    s1, s2 = rng.random((6, 6)), rng.random((6, 6))
    pooled = pooled_roc([s1, s2], [g1, g2])
    assert pooled.n_pos == roc_curve(s1, g1).n_pos + roc_curve(s2, g2).n_pos
    assert pooled.n_pos + pooled.n_neg == 30


def test_top_k():
    rng = np.random.default_rng(4)
    s = rng.random((7, 7))
    s = s + s.T
    assert top_k_edges(s, 0) == []
    top = top_k_edges(s, 5)
    assert len(top) == 5
    iu, ju = np.triu_indices(7, 1)
    assert sorted(s[i, j] for i, j in top) == sorted(np.sort(s[iu, ju])[-5:])
    tied = np.ones((4, 4))
    assert top_k_edges(tied, 3) == [(0, 1), (0, 2), (0, 3)]
    with pytest.raises(ValueError):
        top_k_edges(s, 22)


def _spd(p, seed):
    A = np.random.default_rng(seed).normal(size=(3 * p, p))
    return A.T @ A / (3 * p)


def test_refit_complete_and_empty():
    S = _spd(5, 0)
    full = np.ones((5, 5), int) - np.eye(5, dtype=int)
    assert np.allclose(fit_precision_given_structure(S, full), np.linalg.inv(S), atol=1e-7)
    empty = fit_precision_given_structure(S, np.zeros((5, 5), int))
    assert np.allclose(empty, np.diag(1 / np.diag(S)))


def test_refit_recovers_chain():
    theta = np.array([[2.0, 0.6, 0.0], [0.6, 2.0, -0.5], [0.0, -0.5, 1.5]])
    est = fit_precision_given_structure(np.linalg.inv(theta), (theta != 0).astype(int) - np.eye(3, dtype=int))
    assert np.allclose(est, theta, atol=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 8), st.integers(0, 2**32 - 1))
def test_refit_stationarity(p, seed):
    rng = np.random.default_rng(seed)
    S = _spd(p, seed)
    G = gen_random_graph(p, float(rng.uniform(0.2, 0.8)), rng)
    est = fit_precision_given_structure(S, G, tol=1e-10)
    W = np.linalg.inv(est)
    support = G.astype(bool) | np.eye(p, dtype=bool)
    assert np.max(np.abs(W - S)[support]) < 1e-8
    assert np.all(est[~support] == 0)
    assert np.array_equal(est, est.T)


def test_refit_errors():
    cyc = np.roll(np.eye(6, dtype=int), 1, axis=1)
    cyc = cyc | cyc.T
    with pytest.raises(NonConvergence):
        fit_precision_given_structure(_spd(6, 2), cyc, tol=1e-14, max_iter=1)
    S = _spd(3, 1)
    S[1, :] = S[:, 1] = 0.0
    with pytest.raises(SingularCovariance):
        fit_precision_given_structure(S, np.zeros((3, 3)))


def test_bic_recovers_truth_with_separating_scores():
    rng = np.random.default_rng(5)
    g = gen_random_graph(10, 0.2, rng)
    theta = gen_precision(g, rng=rng)
    X = sample_mvn(theta, 2000, rng)
    X -= X.mean(axis=0)
    scores = np.where(g == 1, 0.9, 0.1) + rng.uniform(-0.05, 0.05, size=g.shape)
    scores = (scores + scores.T) / 2
    sel = bic_select(X, scores)
    assert np.array_equal(sel.structure, g)
    assert sel.table and not sel.failed


def test_bic_grid_edge_cases():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(50, 4))
    scores = rng.random((4, 4))
    scores = (scores + scores.T) / 2
    one = bic_select(X, scores, [0.0])
    assert one.threshold == 0.0 and one.structure.sum() == 12
    high = bic_select(X, scores, [2.0, 3.0])
    assert high.structure.sum() == 0
    # two thresholds giving the same (empty) model: the tie goes to the first listed sparser model
    assert high.threshold == 2.0
