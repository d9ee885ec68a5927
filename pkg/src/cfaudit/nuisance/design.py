"""Design-matrix construction shared by the nuisance models."""

import numpy as np

from ..data import Dataset


def protected_dummies(ds: Dataset):
    """One-hot encode protected characteristics (reference level dropped).

    With exactly two characteristics, pairwise interaction columns are
    appended as well; with more, only main effects enter.
    Returns (columns list, names list); columns are float arrays.
    """
    cols, names = [], []
    per_char = []
    for j in range(ds.n_characteristics):
        labels = ds.level_labels(j)
        char_cols = []
        for code in range(1, len(labels)):
            col = (ds.a[:, j] == code).astype(float)
            name = "%s=%s" % (ds.spec.protected_columns[j], labels[code])
            cols.append(col)
            names.append(name)
            char_cols.append((col, name))
        per_char.append(char_cols)
    if ds.n_characteristics == 2:
        for c0, n0 in per_char[0]:
            for c1, n1 in per_char[1]:
                cols.append(c0 * c1)
                names.append("%s*%s" % (n0, n1))
    return cols, names


def _assemble(ds, blocks, names):
    X = np.column_stack([np.ones(ds.n)] + blocks) if blocks else \
        np.ones((ds.n, 1))
    return X, tuple(["intercept"] + names)


def propensity_design(ds: Dataset):
    """Features for the treatment model: covariates, protected, score."""
    dummies, dummy_names = protected_dummies(ds)
    blocks = [ds.x[:, j] for j in range(ds.n_covariates)]
    names = list(ds.spec.covariate_columns)
    blocks += dummies
    names += dummy_names
    blocks.append(ds.s.astype(float))
    names.append(ds.spec.score_column)
    return _assemble(ds, blocks, names)


def outcome_design(ds: Dataset, include_score: bool, score_value=None):
    """Features for outcome regressions on untreated records.

    ``score_value`` (0 or 1) substitutes a constant for the observed
    score column, which is how counterfactual-score predictions are
    formed at estimation time.
    """
    dummies, dummy_names = protected_dummies(ds)
    blocks = [ds.x[:, j] for j in range(ds.n_covariates)]
    names = list(ds.spec.covariate_columns)
    blocks += dummies
    names += dummy_names
    if include_score:
        if score_value is None:
            blocks.append(ds.s.astype(float))
        else:
            blocks.append(np.full(ds.n, float(score_value)))
        names.append(ds.spec.score_column)
    return _assemble(ds, blocks, names)
