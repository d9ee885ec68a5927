"""Outcome regressions fitted on untreated records.

Two logistic models support the regression-style error-rate estimator:
``mu0`` conditions on covariates, protected levels, and the screening
decision; ``mu0_star`` drops the screening decision. Both predict the
probability of the adverse outcome for an untreated record.
"""

from dataclasses import dataclass

import numpy as np

from ..data import Dataset
from ..errors import PositivityViolationError
from .design import outcome_design
from .glm import GlmModel, fit_logistic_glm, predict_glm


@dataclass(frozen=True)
class OutcomeRegressions:
    mu0: GlmModel
    mu0_star: GlmModel
    n_untreated: int

    def predict_mu0(self, ds: Dataset, score_value) -> np.ndarray:
        """P(adverse outcome | X, A, S=score_value, untreated) per record."""
        X, _ = outcome_design(ds, include_score=True, score_value=score_value)
        return predict_glm(self.mu0, X)

    def predict_mu0_star(self, ds: Dataset) -> np.ndarray:
        """P(adverse outcome | X, A, untreated) per record."""
        X, _ = outcome_design(ds, include_score=False)
        return predict_glm(self.mu0_star, X)


def fit_outcome_regressions(ds: Dataset) -> OutcomeRegressions:
    untreated = np.flatnonzero(ds.d == 0)
    if untreated.size == 0:
        raise PositivityViolationError(
            "no untreated records available for outcome regressions")
    y = ds.y.astype(float)
    Xs, names_s = outcome_design(ds, include_score=True)
    Xn, names_n = outcome_design(ds, include_score=False)
    mu0 = fit_logistic_glm(Xs[untreated], y[untreated],
                           column_names=names_s, drop_constant=True)
    mu0_star = fit_logistic_glm(Xn[untreated], y[untreated],
                                column_names=names_n, drop_constant=True)
    return OutcomeRegressions(mu0=mu0, mu0_star=mu0_star,
                              n_untreated=int(untreated.size))
