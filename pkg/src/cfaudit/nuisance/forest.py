"""Random forest of Gini-split classification trees, built from scratch.

Trees are grown on bootstrap resamples with a random feature subset at
every split; predictions are the forest-average leaf event frequency.
Everything is deterministic given the seed.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError


@dataclass(frozen=True)
class _Tree:
    feature: np.ndarray      # split feature per node, -1 at leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray        # event frequency among training rows at the node
    count: np.ndarray        # training rows reaching the node


@dataclass(frozen=True)
class ForestModel:
    trees: tuple
    n_features: int
    n_trees: int
    max_depth: int
    min_leaf: int
    mtry: int
    seed: int


def _grow_tree(X, y, rng, max_depth, min_leaf, mtry):
    n, p = X.shape
    boot = rng.integers(0, n, n)
    feature, threshold, left, right, value, count = [], [], [], [], [], []

    def new_node(idx):
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[idx].mean()))
        count.append(int(idx.size))
        return node

    def build(idx, depth):
        node = new_node(idx)
        ysub = y[idx]
        n_node = idx.size
        pos = float(ysub.sum())
        if depth >= max_depth or n_node < 2 * min_leaf or pos == 0.0 or pos == n_node:
            return node
        feats = rng.choice(p, size=min(mtry, p), replace=False)
        best_cost = np.inf
        best_f = -1
        best_thr = 0.0
        for f in feats:
            v = X[idx, f]
            order = np.argsort(v, kind="stable")
            vs = v[order]
            ys = ysub[order]
            csum = np.cumsum(ys)
            ks = np.arange(1, n_node)
            valid = (vs[1:] > vs[:-1]) & (ks >= min_leaf) & (n_node - ks >= min_leaf)
            if not valid.any():
                continue
            nl = ks.astype(float)
            nr = float(n_node) - nl
            with np.errstate(invalid="ignore"):
                pl = csum[:-1] / nl
                pr = (pos - csum[:-1]) / nr
            cost = nl * 2.0 * pl * (1.0 - pl) + nr * 2.0 * pr * (1.0 - pr)
            cost = np.where(valid, cost, np.inf)
            j = int(np.argmin(cost))
            if cost[j] < best_cost:
                best_cost = float(cost[j])
                best_f = int(f)
                best_thr = 0.5 * (vs[j] + vs[j + 1])
        if best_f < 0:
            return node
        mask = X[idx, best_f] <= best_thr
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = build(idx[mask], depth + 1)
        right[node] = build(idx[~mask], depth + 1)
        return node

    build(boot, 0)
    return _Tree(feature=np.asarray(feature, dtype=np.int32),
                 threshold=np.asarray(threshold, dtype=np.float64),
                 left=np.asarray(left, dtype=np.int32),
                 right=np.asarray(right, dtype=np.int32),
                 value=np.asarray(value, dtype=np.float64),
                 count=np.asarray(count, dtype=np.int64))


def fit_random_forest(features, labels, *, n_trees: int = 100,
                      max_depth: int = 8, min_leaf: int = 5,
                      mtry=None, seed: int = 0) -> ForestModel:
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    if X.ndim != 2:
        raise DomainError("features must be a 2-d array")
    n, p = X.shape
    if y.shape != (n,) or n == 0 or p == 0:
        raise DomainError("labels/features shape mismatch or empty input")
    if not np.all(np.isin(np.unique(y), (0.0, 1.0))):
        raise DomainError("labels must be binary 0/1")
    if mtry is None:
        mtry = int(math.ceil(math.sqrt(p)))
    if mtry < 1:
        raise DomainError("mtry must be at least 1")
    ss = seed if isinstance(seed, np.random.SeedSequence) else \
        np.random.SeedSequence(seed)
    streams = ss.spawn(n_trees)
    trees = tuple(_grow_tree(X, y, np.random.default_rng(ss),
                             max_depth, min_leaf, mtry)
                  for ss in streams)
    return ForestModel(trees=trees, n_features=p, n_trees=n_trees,
                       max_depth=max_depth, min_leaf=min_leaf,
                       mtry=int(mtry), seed=seed)


def _route(tree: _Tree, X: np.ndarray) -> np.ndarray:
    node = np.zeros(X.shape[0], dtype=np.int64)
    while True:
        feat = tree.feature[node]
        going = feat >= 0
        if not going.any():
            break
        safe_feat = np.where(going, feat, 0)
        xv = X[np.arange(X.shape[0]), safe_feat]
        go_left = xv <= tree.threshold[node]
        nxt = np.where(go_left, tree.left[node], tree.right[node])
        node = np.where(going, nxt, node)
    return tree.value[node]


def predict_forest(model: ForestModel, features) -> np.ndarray:
    """Average leaf frequency across trees; always within [0, 1]."""
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DomainError("feature width %r does not match model width %d"
                          % (X.shape, model.n_features))
    out = np.zeros(X.shape[0])
    for tree in model.trees:
        out += _route(tree, X)
    return out / len(model.trees)
