"""Nuisance models: logistic GLM, random forest, ensembling, cross-fitting."""

from .design import outcome_design, propensity_design, protected_dummies
from .forest import ForestModel, fit_random_forest, predict_forest
from .glm import GlmModel, fit_logistic_glm, predict_glm
from .outcome import OutcomeRegressions, fit_outcome_regressions
from .propensity import (PropensityEstimate, SuperLearner, clamp_propensity,
                         cross_fit_propensity, super_learner_combine)

__all__ = [
    "ForestModel", "GlmModel", "OutcomeRegressions", "PropensityEstimate",
    "SuperLearner", "clamp_propensity", "cross_fit_propensity",
    "fit_logistic_glm", "fit_outcome_regressions", "fit_random_forest",
    "outcome_design", "predict_forest", "predict_glm", "propensity_design",
    "protected_dummies", "super_learner_combine",
]
