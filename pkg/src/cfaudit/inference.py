"""Uncertainty for disparity metrics.

Two engines live here. The permutation engine breaks the link between
protected characteristics and everything else by jointly permuting the
protected rows, yielding a reference distribution and a u-value (the
fraction of reference samples strictly below the observed metric). The
bootstrap engine resamples m-of-n with m growing like n^0.75 and
rescales deviations by sqrt(m), which keeps intervals honest for
boundary-prone statistics like absolute differences; three interval
styles (t, normal, percentile) are derived from one bootstrap run.

Both engines re-draw a replicate whose metric is infeasible (for
example a resample that empties every denominator of a group), up to
five attempts per replicate, and count the redraws.
"""

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import Dataset, GroupIndex
from .errors import ConfigError, InfeasibilityError, ResamplingExhaustedError
from .estimators import METHODS, WEIGHTED_METHODS, error_rate_table, \
    marginal_error_rate_tables
from .metrics import (KINDS, NORMALIZATIONS, delta_avg, delta_marg, delta_max,
                      delta_var, pairwise_differences)
from .nuisance import (OutcomeRegressions, PropensityEstimate,
                       cross_fit_propensity, fit_outcome_regressions)
from .numerics import norm_ppf

METRICS = ("avg", "max", "var", "marg", "obs")

# stream tags keep the engines' random streams disjoint
_PERM_DATA, _PERM_FIT = 101, 102
_BOOT_DATA, _BOOT_FIT = 201, 202

_ATTEMPTS_PER_REPLICATE = 5


@dataclass(frozen=True)
class MetricSpec:
    """Names one metric to run inference on."""

    metric: str = "avg"
    kind: str = "negative"
    method: str = "weighted-glm"
    normalization: str = "pair-mean"

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ConfigError("unknown metric %r; expected one of %s"
                              % (self.metric, ", ".join(METRICS)))
        if self.kind not in KINDS:
            raise ConfigError("unknown rate kind %r" % (self.kind,))
        if self.method not in METHODS:
            raise ConfigError("unknown method %r" % (self.method,))
        if self.normalization not in NORMALIZATIONS:
            raise ConfigError("unknown normalization %r" % (self.normalization,))


@dataclass(frozen=True)
class ReferenceDistribution:
    spec: MetricSpec
    samples: np.ndarray        # one metric value per permutation, draw order
    permutations: int
    seed: int
    refit: bool
    n_redrawn: int

    def __post_init__(self):
        s = np.array(self.samples, dtype=float, copy=True)
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)


@dataclass(frozen=True)
class BootstrapResult:
    theta_n: float
    estimates: np.ndarray      # statistic on each m-sized resample
    rescaled: np.ndarray       # sqrt(m) * (estimate - theta_n)
    m: int
    n: int
    resamples: int
    se: float
    seed: int
    refit: bool
    n_redrawn: int
    spec: Optional[MetricSpec] = None


@dataclass(frozen=True)
class ConfidenceInterval:
    method: str                # "t" | "normal" | "percentile"
    level: float               # e.g. 0.9
    lo: float
    hi: float

    @property
    def truncated_lo(self) -> float:
        """Lower endpoint truncated at 0, for metrics that cannot be
        negative. Percentile intervals never need it."""
        return max(self.lo, 0.0)

    @property
    def length(self) -> float:
        return self.hi - self.lo


# -- metric evaluation --------------------------------------------------------

class _FrozenRegressions:
    """Row-aligned regression predictions, standing in for a fitted model.

    Freezing predictions per record (rather than re-running a fitted
    model on modified rows) is what makes no-refit resampling exact:
    subsetting rows subsets their nuisance values with them.
    """

    def __init__(self, mu0_s1, mu0_s0, mu0_star):
        self.mu0_s1 = np.asarray(mu0_s1, dtype=float)
        self.mu0_s0 = np.asarray(mu0_s0, dtype=float)
        self.mu0_star_values = np.asarray(mu0_star, dtype=float)

    @staticmethod
    def from_fit(reg: OutcomeRegressions, ds: Dataset) -> "_FrozenRegressions":
        return _FrozenRegressions(reg.predict_mu0(ds, score_value=1),
                                  reg.predict_mu0(ds, score_value=0),
                                  reg.predict_mu0_star(ds))

    def subset(self, idx) -> "_FrozenRegressions":
        return _FrozenRegressions(self.mu0_s1[idx], self.mu0_s0[idx],
                                  self.mu0_star_values[idx])

    # duck interface used by the estimators module
    def predict_mu0(self, ds, score_value):
        return self.mu0_s1 if score_value == 1 else self.mu0_s0

    def predict_mu0_star(self, ds):
        return self.mu0_star_values


def _fit_for_method(ds, method, seed, folds=10, forest_kwargs=None):
    """Fit whichever nuisance the method needs; (propensity, regressions)."""
    if method == "weighted-glm":
        return cross_fit_propensity(ds, learner="glm"), None
    if method == "weighted-ensemble":
        return cross_fit_propensity(ds, learner="ensemble", folds=folds,
                                    seed=seed, forest_kwargs=forest_kwargs), None
    if method == "weighted-true":
        raise ConfigError("true treatment probabilities cannot be refit; "
                          "supply them explicitly")
    if method == "regression":
        return None, fit_outcome_regressions(ds)
    return None, None          # observational


def _metrics_for(ds, gi, specs, provider):
    """Evaluate several MetricSpecs on one dataset, sharing tables."""
    by_method = {}
    for sp in specs:
        by_method.setdefault(sp.method, []).append(sp)
    out = {}
    obs_table = None

    def get_obs():
        nonlocal obs_table
        if obs_table is None:
            obs_table = error_rate_table(ds, gi, "observational")
        return obs_table

    for method, sps in by_method.items():
        propensity = regressions = None
        if method != "observational":
            propensity, regressions = provider(method)
        main = None
        marginals = None
        deltas_cache = {}
        for sp in sps:
            if sp.metric == "obs":
                key = ("obs", sp.kind)
                if key not in deltas_cache:
                    deltas_cache[key] = pairwise_differences(get_obs(), sp.kind)
                out[sp] = delta_avg(deltas_cache[key], sp.normalization)
                continue
            if sp.metric == "marg":
                if marginals is None:
                    marginals = marginal_error_rate_tables(
                        ds, method, propensity=propensity,
                        regressions=regressions)
                out[sp] = delta_marg(marginals, sp.kind, sp.normalization)
                continue
            if main is None:
                main = error_rate_table(ds, gi, method, propensity=propensity,
                                        regressions=regressions)
            if sp.kind not in deltas_cache:
                deltas_cache[sp.kind] = pairwise_differences(main, sp.kind)
            deltas = deltas_cache[sp.kind]
            if sp.metric == "avg":
                out[sp] = delta_avg(deltas, sp.normalization)
            elif sp.metric == "max":
                out[sp] = delta_max(deltas)
            else:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    out[sp] = delta_var(deltas, sp.normalization)
    return out


_METHOD_OF_PROPENSITY = {"glm": "weighted-glm", "ensemble": "weighted-ensemble",
                         "true-dgp": "weighted-true"}


def _overrides_from(propensity, regressions):
    """Map caller-supplied nuisance objects to the methods they serve."""
    overrides = {}
    if propensity is not None:
        overrides[_METHOD_OF_PROPENSITY[propensity.method]] = (propensity, None)
    if regressions is not None:
        overrides["regression"] = (None, regressions)
    return overrides


def _make_provider(ds, overrides, seed):
    """Provider resolving/fitting nuisance once per method on this data."""
    cache = dict(overrides)

    def provider(method):
        if method not in cache:
            cache[method] = _fit_for_method(ds, method, seed)
        return cache[method]

    return provider


def _subset_propensity(p: PropensityEstimate, idx) -> PropensityEstimate:
    return PropensityEstimate(pi=p.pi[idx], method=p.method,
                              clamp_lo=p.clamp_lo, clamp_hi=p.clamp_hi)


def _freeze_nuisance(ds, methods, base_provider):
    """Fit (or accept) each method's nuisance once and pin it per record."""
    frozen = {}
    for method in methods:
        p, r = base_provider(method)
        if r is not None and not isinstance(r, _FrozenRegressions):
            r = _FrozenRegressions.from_fit(r, ds)
        frozen[method] = (p, r)
    return frozen


def evaluate_metric(ds: Dataset, gi: GroupIndex, spec: MetricSpec, *,
                    propensity: Optional[PropensityEstimate] = None,
                    regressions=None, nuisance_seed: int = 0) -> float:
    """Point estimate of one disparity metric.

    Nuisance models are fit here unless supplied; ``weighted-true``
    always needs an explicit propensity since the truth is not learnable
    from the table.
    """
    provider = _make_provider(ds, _overrides_from(propensity, regressions),
                              nuisance_seed)
    return _metrics_for(ds, gi, [spec], provider)[spec]


def metric_on_permutation(ds: Dataset, gi: GroupIndex, spec: MetricSpec,
                          perm, *, propensity=None, regressions=None,
                          nuisance_seed: int = 0) -> float:
    """Evaluate a metric after applying an explicit row permutation to
    the protected block (treatment, outcome, covariates, score stay
    put). The identity permutation reproduces the observed metric."""
    perm = np.asarray(perm)
    ds_perm = ds.with_protected(ds.a[perm])
    return evaluate_metric(ds_perm, gi, spec, propensity=propensity,
                           regressions=regressions,
                           nuisance_seed=nuisance_seed)


# -- replicate machinery ------------------------------------------------------

def _map_in_order(fn, count, threads):
    if threads <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


def _run_with_retries(make_value, rng, label):
    for attempt in range(_ATTEMPTS_PER_REPLICATE):
        try:
            return make_value(rng), attempt > 0
        except InfeasibilityError:
            continue
    raise ResamplingExhaustedError(
        "%s replicate stayed infeasible after %d attempts"
        % (label, _ATTEMPTS_PER_REPLICATE))


def reference_distributions(ds: Dataset, gi: GroupIndex, specs, *,
                            permutations: int = 1000, seed: int = 0,
                            refit: bool = True, threads: int = 1,
                            propensity=None, regressions=None) -> dict:
    """Joint permutation reference for several metrics at once.

    One permuted dataset serves every requested metric, so nuisance
    models are refit once per permutation, not once per metric. A
    permutation infeasible for any requested metric is redrawn for all
    of them, keeping the joint sample aligned. With ``refit=False`` the
    original per-record nuisance values ride along unchanged.
    """
    specs = tuple(specs)
    if permutations < 1:
        raise ConfigError("permutations must be positive")
    if permutations < 100:
        warnings.warn("reference distribution uses only %d permutations; "
                      "u-values will be coarse" % permutations)
    needs_fit = {sp.method for sp in specs if sp.method != "observational"}
    base_overrides = _overrides_from(propensity, regressions)
    if refit:
        # true treatment probabilities are data, not a model: they stay
        # attached to their records even when everything else is refit
        freeze_methods = needs_fit & {"weighted-true"}
    else:
        freeze_methods = needs_fit
    frozen = _freeze_nuisance(ds, freeze_methods,
                              _make_provider(ds, base_overrides, seed))

    def one(j):
        rng = np.random.default_rng([seed, _PERM_DATA, j])

        def attempt(rng):
            perm = rng.permutation(ds.n)
            ds_j = ds.with_protected(ds.a[perm])
            provider = _make_provider(
                ds_j, frozen, np.random.SeedSequence([seed, _PERM_FIT, j]))
            return _metrics_for(ds_j, gi, specs, provider)

        return _run_with_retries(attempt, rng, "permutation")

    results = _map_in_order(one, permutations, threads)
    out = {}
    for sp in specs:
        samples = np.array([vals[sp] for vals, _ in results])
        redrawn = sum(1 for _, re in results if re)
        out[sp] = ReferenceDistribution(spec=sp, samples=samples,
                                        permutations=permutations, seed=seed,
                                        refit=refit, n_redrawn=redrawn)
    return out


def permutation_reference(ds: Dataset, gi: GroupIndex, spec: MetricSpec, *,
                          permutations: int = 1000, seed: int = 0,
                          refit: bool = True, threads: int = 1,
                          propensity=None, regressions=None
                          ) -> ReferenceDistribution:
    """Permutation reference distribution for one metric."""
    return reference_distributions(
        ds, gi, [spec], permutations=permutations, seed=seed, refit=refit,
        threads=threads, propensity=propensity, regressions=regressions)[spec]


def u_value(reference: ReferenceDistribution, observed: float) -> float:
    """Fraction of reference samples strictly below the observed value.

    High values mean the observed disparity exceeds what severing the
    protected labels produces; this is a directional plausibility index,
    not a p-value.
    """
    return float(np.sum(reference.samples < observed) / reference.samples.size)


# -- rescaled bootstrap -------------------------------------------------------

def m_from_rule(n: int, rule="n^0.75") -> int:
    """Resample size: ceil(n^exponent) for "n^<exponent>" rules, or a
    literal integer. Must land strictly below n."""
    if isinstance(rule, (int, np.integer)):
        m = int(rule)
    else:
        text = str(rule).strip()
        if text.startswith("n^"):
            try:
                expo = float(text[2:])
            except ValueError:
                raise ConfigError("bad resample-size rule %r" % (rule,))
            if not 0.0 < expo < 1.0:
                raise ConfigError("resample-size exponent must be in (0, 1)")
            m = int(math.ceil(n ** expo))
        else:
            try:
                m = int(text)
            except ValueError:
                raise ConfigError("bad resample-size rule %r" % (rule,))
    if m < 2:
        raise ConfigError("resample size m=%d is too small" % m)
    if m >= n:
        raise ConfigError("resample size m=%d must be below n=%d" % (m, n))
    return m


def _finish_bootstrap(theta_n, estimates, redrawn, m, n, B, seed, refit, spec):
    rescaled = math.sqrt(m) * (estimates - theta_n)
    se = math.sqrt(float(np.var(rescaled, ddof=1)) / n) if B > 1 else 0.0
    est = np.asarray(estimates)
    est.flags.writeable = False
    rescaled.flags.writeable = False
    return BootstrapResult(theta_n=float(theta_n), estimates=est,
                           rescaled=rescaled, m=m, n=n, resamples=B, se=se,
                           seed=seed, refit=refit, n_redrawn=redrawn, spec=spec)


def bootstrap_distributions(ds: Dataset, gi: GroupIndex, specs, *,
                            resamples: int = 1000, m=None, seed: int = 0,
                            refit: bool = True, threads: int = 1,
                            propensity=None, regressions=None) -> dict:
    """Rescaled m-of-n bootstrap for several metrics from one resample
    stream. Returns {spec: BootstrapResult}."""
    specs = tuple(specs)
    if resamples < 2:
        raise ConfigError("at least two bootstrap resamples are required")
    if resamples < 200:
        warnings.warn("only %d bootstrap resamples; interval endpoints will "
                      "be noisy" % resamples)
    n = ds.n
    m = m_from_rule(n) if m is None else m_from_rule(n, m)

    base_provider = _make_provider(ds, _overrides_from(propensity, regressions),
                                   seed)
    theta_full = _metrics_for(ds, gi, specs, base_provider)
    needs_fit = {sp.method for sp in specs if sp.method != "observational"}
    freeze_methods = needs_fit if not refit else needs_fit & {"weighted-true"}
    frozen = _freeze_nuisance(ds, freeze_methods, base_provider)

    def one(i):
        rng = np.random.default_rng([seed, _BOOT_DATA, i])

        def attempt(rng):
            idx = rng.integers(0, n, m)
            ds_i = ds.subset(idx)
            overrides = {
                method: (_subset_propensity(p, idx) if p is not None else None,
                         r.subset(idx) if r is not None else None)
                for method, (p, r) in frozen.items()}
            provider = _make_provider(
                ds_i, overrides, np.random.SeedSequence([seed, _BOOT_FIT, i]))
            return _metrics_for(ds_i, gi, specs, provider)

        return _run_with_retries(attempt, rng, "bootstrap")

    results = _map_in_order(one, resamples, threads)
    out = {}
    for sp in specs:
        estimates = np.array([vals[sp] for vals, _ in results])
        redrawn = sum(1 for _, re in results if re)
        out[sp] = _finish_bootstrap(theta_full[sp], estimates, redrawn, m, n,
                                    resamples, seed, refit, sp)
    return out


def rescaled_bootstrap(ds: Dataset, gi: GroupIndex, spec: MetricSpec, *,
                       resamples: int = 1000, m=None, seed: int = 0,
                       refit: bool = True, threads: int = 1,
                       propensity=None, regressions=None) -> BootstrapResult:
    """Rescaled m-of-n bootstrap for one metric."""
    return bootstrap_distributions(
        ds, gi, [spec], resamples=resamples, m=m, seed=seed, refit=refit,
        threads=threads, propensity=propensity, regressions=regressions)[spec]


def rescaled_bootstrap_statistic(values, statistic, *, resamples: int = 1000,
                                 m=None, seed: int = 0) -> BootstrapResult:
    """Rescaled m-of-n bootstrap of an arbitrary statistic of an array.

    ``statistic`` maps a (possibly multidimensional) row-subset of
    ``values`` to a float; rows are resampled with replacement.
    """
    values = np.asarray(values)
    n = values.shape[0]
    if resamples < 2:
        raise ConfigError("at least two bootstrap resamples are required")
    m = m_from_rule(n) if m is None else m_from_rule(n, m)
    theta_n = float(statistic(values))
    estimates = np.empty(resamples)
    redrawn = 0
    for i in range(resamples):
        rng = np.random.default_rng([seed, _BOOT_DATA, i])
        for attempt in range(_ATTEMPTS_PER_REPLICATE):
            idx = rng.integers(0, n, m)
            try:
                estimates[i] = float(statistic(values[idx]))
                break
            except InfeasibilityError:
                redrawn += 1
        else:
            raise ResamplingExhaustedError(
                "bootstrap replicate stayed infeasible after %d attempts"
                % _ATTEMPTS_PER_REPLICATE)
    return _finish_bootstrap(theta_n, estimates, redrawn, m, n, resamples,
                             seed, True, None)


# -- confidence intervals -----------------------------------------------------

def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ConfigError("alpha must lie strictly inside (0, 1)")


def ci_t_interval(boot: BootstrapResult, alpha: float = 0.1) -> ConfidenceInterval:
    """Bootstrap-t interval from studentized resample deviations."""
    _check_alpha(alpha)
    level = 1.0 - alpha
    if boot.se == 0.0:
        return ConfidenceInterval("t", level, boot.theta_n, boot.theta_n)
    t_vals = (boot.estimates - boot.theta_n) / boot.se
    q_lo, q_hi = np.quantile(t_vals, [alpha / 2.0, 1.0 - alpha / 2.0])
    return ConfidenceInterval("t", level,
                              lo=boot.theta_n - boot.se * float(q_hi),
                              hi=boot.theta_n - boot.se * float(q_lo))


def ci_normal(boot: BootstrapResult, alpha: float = 0.1) -> ConfidenceInterval:
    """Symmetric interval using the rescaled-bootstrap standard error."""
    _check_alpha(alpha)
    level = 1.0 - alpha
    z = norm_ppf(1.0 - alpha / 2.0)
    return ConfidenceInterval("normal", level,
                              lo=boot.theta_n - z * boot.se,
                              hi=boot.theta_n + z * boot.se)


def ci_percentile(boot: BootstrapResult, alpha: float = 0.1) -> ConfidenceInterval:
    """Quantiles of the rescaled deviations mapped back to the estimate.

    The endpoints de-rescale to plain resample quantiles, so for a
    non-negative statistic both ends stay non-negative.
    """
    _check_alpha(alpha)
    level = 1.0 - alpha
    q_lo, q_hi = np.quantile(boot.rescaled, [alpha / 2.0, 1.0 - alpha / 2.0])
    root_m = math.sqrt(boot.m)
    return ConfidenceInterval("percentile", level,
                              lo=boot.theta_n + float(q_lo) / root_m,
                              hi=boot.theta_n + float(q_hi) / root_m)
