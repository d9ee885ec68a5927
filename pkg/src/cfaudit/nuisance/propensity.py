"""Treatment-probability estimation: super learner and cross-fitting."""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..data import Dataset
from ..errors import ConfigError, CrossFitDegeneracyError, DomainError
from .design import propensity_design
from .forest import ForestModel, fit_random_forest, predict_forest
from .glm import GlmModel, fit_logistic_glm, predict_glm

DEFAULT_CLAMP = (0.005, 0.995)
_MAX_FOLD_DRAWS = 20


@dataclass(frozen=True)
class SuperLearner:
    """Two-member convex combination of a logistic GLM and a forest."""

    glm: GlmModel
    forest: ForestModel
    weights: np.ndarray          # (w_glm, w_forest), on the simplex
    design_columns: tuple


@dataclass(frozen=True)
class PropensityEstimate:
    """Per-record treatment probabilities, already clamped.

    ``fold_of`` records the cross-fitting fold of each record when the
    ensemble learner was used (None otherwise).
    """

    pi: np.ndarray
    method: str                  # "glm" | "ensemble" | "true-dgp"
    clamp_lo: float = DEFAULT_CLAMP[0]
    clamp_hi: float = DEFAULT_CLAMP[1]
    n_clamped_low: int = 0
    n_clamped_high: int = 0
    fold_of: Optional[np.ndarray] = None

    def __post_init__(self):
        pi = np.array(self.pi, dtype=float, copy=True)
        pi.flags.writeable = False
        object.__setattr__(self, "pi", pi)

    def untreated_weights(self) -> np.ndarray:
        """Inverse probability of remaining untreated, 1/(1 - pi)."""
        return 1.0 / (1.0 - self.pi)

    @staticmethod
    def from_probabilities(pi, method: str = "true-dgp",
                           lo: float = DEFAULT_CLAMP[0],
                           hi: float = DEFAULT_CLAMP[1]) -> "PropensityEstimate":
        pi = np.asarray(pi, dtype=float)
        low = int(np.sum(pi < lo))
        high = int(np.sum(pi > hi))
        return PropensityEstimate(pi=clamp_propensity(pi, lo, hi), method=method,
                                  clamp_lo=lo, clamp_hi=hi,
                                  n_clamped_low=low, n_clamped_high=high)


def clamp_propensity(pi, lo: float = DEFAULT_CLAMP[0],
                     hi: float = DEFAULT_CLAMP[1]) -> np.ndarray:
    """Clip probabilities into [lo, hi] so inverse weights stay bounded."""
    if not (0.0 < lo < hi < 1.0):
        raise ConfigError("clamp bounds must satisfy 0 < lo < hi < 1, got (%r, %r)"
                          % (lo, hi))
    return np.clip(np.asarray(pi, dtype=float), lo, hi)


def super_learner_combine(member_predictions, labels, tol: float = 1e-6) -> np.ndarray:
    """Weights minimizing mean squared loss over the two-member simplex.

    Golden-section search on the single free weight to the given
    tolerance; vertex candidates are always considered, and a flat
    objective (identical members) resolves to uniform weights.
    """
    P = np.asarray(member_predictions, dtype=float)
    y = np.asarray(labels, dtype=float)
    if P.ndim != 2 or P.shape[1] != 2 or P.shape[0] != y.shape[0]:
        raise DomainError("member_predictions must be (n, 2) aligned with labels")

    def loss(w):
        r = y - (w * P[:, 0] + (1.0 - w) * P[:, 1])
        return float(r @ r) / y.shape[0]

    diff = P[:, 0] - P[:, 1]
    if float(diff @ diff) / y.shape[0] < 1e-14:
        return np.array([0.5, 0.5])

    inv = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = 0.0, 1.0
    c = b - inv * (b - a)
    d = a + inv * (b - a)
    fc, fd = loss(c), loss(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = loss(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = loss(d)
    candidates = [0.0, 1.0, 0.5 * (a + b)]
    losses = [loss(w) for w in candidates]
    w = candidates[int(np.argmin(losses))]
    return np.array([w, 1.0 - w])


def _forest_features(X: np.ndarray) -> np.ndarray:
    # trees gain nothing from the intercept column
    return X[:, 1:]


def fit_super_learner(X, y, names, *, seed, inner_folds: int = 5,
                      forest_kwargs=None) -> SuperLearner:
    """Fit both members on all rows; weights come from inner CV."""
    forest_kwargs = dict(forest_kwargs or {})
    ss = seed if isinstance(seed, np.random.SeedSequence) else \
        np.random.SeedSequence(seed)
    kids = ss.spawn(3)
    n = X.shape[0]
    inner_folds = min(inner_folds, n)
    rng = np.random.default_rng(kids[0])
    fold_of = np.empty(n, dtype=int)
    fold_of[rng.permutation(n)] = np.arange(n) % inner_folds
    cv = np.empty((n, 2))
    forest_seeds = kids[1].spawn(inner_folds)
    for g in range(inner_folds):
        tr = fold_of != g
        va = ~tr
        glm_g = fit_logistic_glm(X[tr], y[tr], column_names=names,
                                 drop_constant=True)
        cv[va, 0] = predict_glm(glm_g, X[va])
        forest_g = fit_random_forest(_forest_features(X[tr]), y[tr],
                                     seed=forest_seeds[g], **forest_kwargs)
        cv[va, 1] = predict_forest(forest_g, _forest_features(X[va]))
    weights = super_learner_combine(cv, y)
    glm = fit_logistic_glm(X, y, column_names=names, drop_constant=True)
    forest = fit_random_forest(_forest_features(X), y, seed=kids[2],
                               **forest_kwargs)
    return SuperLearner(glm=glm, forest=forest, weights=weights,
                        design_columns=tuple(names))


def _predict_super_learner(sl: SuperLearner, X: np.ndarray) -> np.ndarray:
    return (sl.weights[0] * predict_glm(sl.glm, X)
            + sl.weights[1] * predict_forest(sl.forest, _forest_features(X)))


def _draw_folds(n, folds, d, rng):
    for _ in range(_MAX_FOLD_DRAWS):
        fold_of = np.empty(n, dtype=int)
        fold_of[rng.permutation(n)] = np.arange(n) % folds
        if _folds_valid(fold_of, folds, d):
            return fold_of
    raise CrossFitDegeneracyError(
        "could not arrange %d folds containing both treatment levels "
        "within %d draws" % (folds, _MAX_FOLD_DRAWS))


def _folds_valid(fold_of, folds, d):
    for f in range(folds):
        df = d[fold_of == f]
        if df.size == 0 or df.min() == df.max():
            return False
    return True


def cross_fit_propensity(ds: Dataset, learner: str = "glm", *, folds: int = 10,
                         seed=0, forest_kwargs=None, inner_folds: int = 5,
                         fold_assignment=None,
                         clamp=DEFAULT_CLAMP) -> PropensityEstimate:
    """Estimate treatment probabilities for every record.

    ``learner="glm"`` fits one logistic model on the whole sample (no
    cross-fitting). ``learner="ensemble"`` cross-fits a GLM+forest super
    learner over ``folds`` folds so no record is predicted by a model
    that saw it; fold draws are retried when a fold misses a treatment
    level. ``fold_assignment`` overrides the random fold draw (mainly a
    testing seam) and is validated rather than retried.
    """
    X, names = propensity_design(ds)
    d = np.asarray(ds.d, dtype=float)
    lo, hi = clamp
    if learner == "glm":
        model = fit_logistic_glm(X, d, column_names=names)
        raw = predict_glm(model, X)
        est = PropensityEstimate.from_probabilities(raw, method="glm",
                                                    lo=lo, hi=hi)
        return est
    if learner != "ensemble":
        raise ConfigError("unknown propensity learner %r" % (learner,))

    ss = seed if isinstance(seed, np.random.SeedSequence) else \
        np.random.SeedSequence(seed)
    kids = ss.spawn(2 + folds)
    if fold_assignment is not None:
        fold_of = np.asarray(fold_assignment, dtype=int)
        if fold_of.shape != (ds.n,) or fold_of.min() < 0 or fold_of.max() >= folds:
            raise ConfigError("fold_assignment must give a fold in 0..%d per record"
                              % (folds - 1))
        if not _folds_valid(fold_of, folds, d):
            raise CrossFitDegeneracyError(
                "provided fold assignment leaves a fold without both "
                "treatment levels")
    else:
        fold_of = _draw_folds(ds.n, folds, d, np.random.default_rng(kids[0]))

    raw = np.empty(ds.n)
    for f in range(folds):
        va = fold_of == f
        tr = ~va
        sl = fit_super_learner(X[tr], d[tr], names, seed=kids[2 + f],
                               inner_folds=inner_folds,
                               forest_kwargs=forest_kwargs)
        raw[va] = _predict_super_learner(sl, X[va])
    low = int(np.sum(raw < lo))
    high = int(np.sum(raw > hi))
    return PropensityEstimate(pi=clamp_propensity(raw, lo, hi),
                              method="ensemble", clamp_lo=lo, clamp_hi=hi,
                              n_clamped_low=low, n_clamped_high=high,
                              fold_of=fold_of)
