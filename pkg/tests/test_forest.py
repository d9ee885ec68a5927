import numpy as np
import pytest

from cfaudit.errors import DomainError
from cfaudit.nuisance import (fit_logistic_glm, fit_random_forest, predict_forest,
                              predict_glm)


def _two_moons(rng, n):
    """Interleaved half circles with noise; not linearly separable."""
    half = n // 2
    t0 = rng.uniform(0.0, np.pi, half)
    t1 = rng.uniform(0.0, np.pi, n - half)
    x0 = np.column_stack([np.cos(t0), np.sin(t0)])
    x1 = np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
    X = np.vstack([x0, x1]) + rng.normal(scale=0.15, size=(n, 2))
    y = np.concatenate([np.zeros(half), np.ones(n - half)])
    perm = rng.permutation(n)
    return X[perm], y[perm]


def test_degenerate_labels_give_constant_prediction():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(50, 3))
    model = fit_random_forest(X, np.ones(50), n_trees=10, seed=1)
    assert np.all(predict_forest(model, X) == 1.0)


def test_separating_feature_gets_perfect_training_accuracy():
    rng = np.random.default_rng(1)
    n = 300
    X = rng.normal(size=(n, 4))
    y = (X[:, 2] > 0.3).astype(float)
    model = fit_random_forest(X, y, n_trees=50, seed=2)
    pred = (predict_forest(model, X) >= 0.5).astype(float)
    assert np.mean(pred == y) == 1.0


def test_forest_beats_glm_on_two_moons():
    rng = np.random.default_rng(7)
    X, y = _two_moons(rng, 1000)
    Xt, yt = _two_moons(rng, 1000)
    forest = fit_random_forest(X, y, n_trees=100, seed=3)
    acc_forest = np.mean((predict_forest(forest, Xt) >= 0.5) == yt)
    design = np.column_stack([np.ones(len(y)), X])
    glm = fit_logistic_glm(design, y)
    design_t = np.column_stack([np.ones(len(yt)), Xt])
    acc_glm = np.mean((predict_glm(glm, design_t) >= 0.5) == yt)
    assert acc_forest > acc_glm
    assert acc_forest > 0.9


def test_same_seed_reproduces_exactly():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(200, 5))
    y = (rng.random(200) < 0.4).astype(float)
    m1 = fit_random_forest(X, y, n_trees=20, seed=11)
    m2 = fit_random_forest(X, y, n_trees=20, seed=11)
    assert np.array_equal(predict_forest(m1, X), predict_forest(m2, X))
    m3 = fit_random_forest(X, y, n_trees=20, seed=12)
    assert not np.array_equal(predict_forest(m1, X), predict_forest(m3, X))


def test_tree_structure_invariants():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(400, 3))
    y = (rng.random(400) < 0.5 + 0.3 * np.tanh(X[:, 0])).astype(float)
    min_leaf = 5
    model = fit_random_forest(X, y, n_trees=10, min_leaf=min_leaf, seed=6)
    for tree in model.trees:
        internal = tree.feature >= 0
        # every internal node has two children; leaves have none
        assert np.all(tree.left[internal] >= 0)
        assert np.all(tree.right[internal] >= 0)
        assert np.all(tree.left[~internal] == -1)
        # every leaf saw at least min_leaf training rows
        assert tree.count[~internal].min() >= min_leaf
        # node values are frequencies
        assert tree.value.min() >= 0.0 and tree.value.max() <= 1.0
        # children partition the parent's sample
        for node in np.flatnonzero(internal):
            l, r = tree.left[node], tree.right[node]
            assert tree.count[l] + tree.count[r] == tree.count[node]


def test_predictions_within_unit_interval():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(150, 4))
    y = (rng.random(150) < 0.3).astype(float)
    model = fit_random_forest(X, y, n_trees=30, seed=9)
    p = predict_forest(model, rng.normal(size=(80, 4)))
    assert p.min() >= 0.0 and p.max() <= 1.0


def test_width_mismatch_raises():
    rng = np.random.default_rng(10)
    X = rng.normal(size=(60, 3))
    y = (rng.random(60) < 0.5).astype(float)
    model = fit_random_forest(X, y, n_trees=5, seed=1)
    with pytest.raises(DomainError):
        predict_forest(model, rng.normal(size=(10, 2)))
    with pytest.raises(DomainError):
        fit_random_forest(X, np.full(60, 2.0), n_trees=5)
