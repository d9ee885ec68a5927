"""Logistic regression fit by iteratively reweighted least squares."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError, SingularDesignError
from ..numerics import expit, log1pexp

_PRED_EPS = 1e-12
_SEPARATION_EPS = 1e-6
_COEF_BLOWUP = 1e4


@dataclass(frozen=True)
class GlmModel:
    """Fitted logistic model.

    ``coefficients`` always spans the full design width; columns that
    were dropped as degenerate (see ``dropped_columns``) carry a zero.
    ``nll_trace`` records the negative log-likelihood at each accepted
    IRLS step, which is non-increasing by construction.
    """

    coefficients: np.ndarray
    converged: bool
    iterations: int
    column_names: tuple
    separated: bool = False
    dropped_columns: tuple = ()
    nll_trace: tuple = field(default=(), repr=False)


def _check_rank(X: np.ndarray, names) -> None:
    norms = np.sqrt((X * X).sum(axis=0))
    zero = norms == 0.0
    if np.any(zero):
        bad = [names[j] for j in np.flatnonzero(zero)]
        raise SingularDesignError(
            "design is rank deficient; all-zero columns: %s" % ", ".join(bad),
            columns=bad)
    R = np.linalg.qr(X / norms, mode="r")
    diag = np.abs(np.diag(R))
    bad_idx = np.flatnonzero(diag < 1e-8)
    if bad_idx.size:
        bad = [names[j] for j in bad_idx]
        raise SingularDesignError(
            "design is rank deficient; collinear columns: %s" % ", ".join(bad),
            columns=bad)


def fit_logistic_glm(features, labels, *, max_iter: int = 100, tol: float = 1e-8,
                     column_names=None, drop_constant: bool = False) -> GlmModel:
    """Fit a binary logistic regression.

    Convergence is declared when the score equations are satisfied,
    ``max |X'(y - p)| <= tol * n``. Steps that would increase the
    negative log-likelihood are halved (up to 30 times). Perfect or
    quasi-perfect separation sets the ``separated`` flag instead of
    diverging; a rank-deficient design raises
    :class:`~cfaudit.errors.SingularDesignError` naming the columns.

    ``drop_constant=True`` silently removes degenerate constant columns
    (beyond the first, which serves as the intercept) before fitting and
    reports them in ``dropped_columns`` — useful when fitting on small
    subsets where a dummy column may not vary.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    if X.ndim != 2:
        raise DomainError("features must be a 2-d array")
    n, k = X.shape
    if y.shape != (n,):
        raise DomainError("labels length does not match features")
    if n == 0 or k == 0:
        raise DomainError("empty design")
    names = tuple(column_names) if column_names is not None else \
        tuple("c%d" % j for j in range(k))
    if len(names) != k:
        raise DomainError("column_names length does not match design width")

    keep = np.ones(k, dtype=bool)
    dropped = []
    if drop_constant:
        seen_constant = False
        for j in range(k):
            col = X[:, j]
            if col.size and np.ptp(col) == 0.0:
                if col[0] != 0.0 and not seen_constant:
                    seen_constant = True   # acts as the intercept
                else:
                    keep[j] = False
                    dropped.append(names[j])
    Xk = X[:, keep]
    names_k = tuple(n_ for n_, kp in zip(names, keep) if kp)
    _check_rank(Xk, names_k)

    beta = np.zeros(Xk.shape[1])
    eta = Xk @ beta
    nll = float(np.sum(log1pexp(eta)) - y @ eta)
    trace = [nll]
    converged = False
    separated = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        p = expit(eta)
        if np.all(np.abs(y - p) < _SEPARATION_EPS):
            separated = True
            break
        score = Xk.T @ (y - p)
        if np.max(np.abs(score)) <= tol * n:
            converged = True
            break
        w = np.clip(p * (1.0 - p), 1e-10, None)
        H = (Xk * w[:, None]).T @ Xk
        try:
            delta = np.linalg.solve(H, score)
        except np.linalg.LinAlgError:
            delta = np.linalg.lstsq(H, score, rcond=None)[0]
        step = 1.0
        improved = False
        for _ in range(30):
            beta_new = beta + step * delta
            eta_new = Xk @ beta_new
            nll_new = float(np.sum(log1pexp(eta_new)) - y @ eta_new)
            if nll_new <= nll + 1e-12:
                improved = True
                break
            step *= 0.5
        if not improved:
            break   # stalled at numerical floor
        beta, eta, nll = beta_new, eta_new, nll_new
        trace.append(nll)
        if np.max(np.abs(beta)) > _COEF_BLOWUP:
            separated = True
            break

    # quasi-separation leaves some fitted probability numerically at a label
    p_end = expit(eta)
    if np.any(p_end < 1e-10) or np.any(p_end > 1.0 - 1e-10):
        separated = True

    coef = np.zeros(k)
    coef[keep] = beta
    coef.flags.writeable = False
    return GlmModel(coefficients=coef, converged=converged,
                    iterations=iterations, column_names=names,
                    separated=separated, dropped_columns=tuple(dropped),
                    nll_trace=tuple(trace))


def predict_glm(model: GlmModel, features) -> np.ndarray:
    """Predicted event probabilities, clamped to [1e-12, 1 - 1e-12]."""
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.coefficients.shape[0]:
        raise DomainError("feature width %r does not match model width %d"
                          % (X.shape, model.coefficients.shape[0]))
    return np.clip(expit(X @ model.coefficients), _PRED_EPS, 1.0 - _PRED_EPS)
