"""Synthetic benchmarks with known counterfactual truth.

Two generators live here. The demonstration generator draws four groups
whose score errors are fixed observationally (FPR 0.1, FNR 0.2) while a
per-group intervention strength moves the counterfactual rates — it has
a closed-form truth and exists to show observational metrics missing
real disparities. The scenario generator is the estimation benchmark: a
logistic outcome/treatment world over four covariates where a random
forest risk model is trained on one cohort, truth is counted directly
from potential outcomes on a large validation cohort, and estimation
cohorts of varying size feed the estimators.

On top of the generators sit the experiment drivers: `replicate` runs
the scenario x size x method grid, and `coverage_study` measures
interval coverage against the known truth.
"""

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import Dataset, dataset_from_arrays, enumerate_groups, group_codes
from .errors import (ConfigError, DomainError, InfeasibilityError,
                     ResamplingExhaustedError)
from .estimators import (METHODS, ErrorRateTable, _build_rows,
                         error_rate_table, marginal_error_rate_tables,
                         observational_rate_cells)
from .inference import (MetricSpec, ci_normal, ci_percentile, ci_t_interval,
                        rescaled_bootstrap)
from .metrics import KINDS, suite_from_tables
from .nuisance import (ForestModel, PropensityEstimate, cross_fit_propensity,
                       fit_outcome_regressions, fit_random_forest,
                       predict_forest)
from .numerics import expit, logit

DEMO_GROUPS = ("majority", "m1", "m2", "minority")
_DEMO_CODES = {"majority": (0, 0), "m1": (1, 0), "m2": (0, 1),
               "minority": (1, 1)}

# group shares: the default has a dominant majority and a small minority;
# the spread variant makes the three non-minority groups equally common
DEFAULT_DEMO_SHARES = {"majority": 0.56, "m1": 0.24, "m2": 0.14,
                       "minority": 0.06}
SPREAD_DEMO_SHARES = {"majority": 0.32, "m1": 0.32, "m2": 0.32,
                      "minority": 0.04}

ROLES = ("train", "validation", "estimation")
PREDICTOR_SETS = ("x-only", "protected-and-x")

_SCORE_COEFFICIENT = logit(0.1)

# replication-stream tags (entropy components for per-task seeds)
_TAG_TRAIN, _TAG_FOREST, _TAG_VALIDATION = 51, 52, 53
_TAG_ESTIMATION, _TAG_NUISANCE, _TAG_SWEEP = 54, 55, 41
_TAG_COVERAGE_DATA, _TAG_COVERAGE_BOOT = 61, 62

_GRID_ATTEMPTS = 5


def _check_prob(value, name):
    if not 0.0 <= value <= 1.0:
        raise ConfigError("%s must lie in [0, 1], got %r" % (name, value))


# -- demonstration generator --------------------------------------------------

@dataclass(frozen=True)
class DemoGroup:
    """One group's generating parameters.

    `need` is P(the event would occur untreated); the two opportunity
    rates are treatment probabilities given need / no need; `strength`
    is how effectively treatment prevents the event; `share` is the
    group's population fraction.
    """

    need: float
    opportunity_need: float
    opportunity_no_need: float
    strength: float
    share: float

    def __post_init__(self):
        for name in ("need", "opportunity_need", "opportunity_no_need",
                     "strength", "share"):
            _check_prob(getattr(self, name), name)


@dataclass(frozen=True)
class DemoConfig:
    majority: DemoGroup
    m1: DemoGroup
    m2: DemoGroup
    minority: DemoGroup
    fpr_obs: float = 0.1
    fnr_obs: float = 0.2

    def __post_init__(self):
        _check_prob(self.fpr_obs, "fpr_obs")
        _check_prob(self.fnr_obs, "fnr_obs")
        total = sum(g.share for g in self.groups())
        if abs(total - 1.0) > 1e-9:
            raise ConfigError("group shares must sum to 1, got %.6f" % total)

    def group(self, name: str) -> DemoGroup:
        if name not in DEMO_GROUPS:
            raise ConfigError("unknown demo group %r" % (name,))
        return getattr(self, name)

    def groups(self) -> tuple:
        return tuple(getattr(self, name) for name in DEMO_GROUPS)


def demo_config(z_minority: float = 0.2, z_m1: float = 0.2,
                z_m2: float = 0.2, z_majority: float = 0.2, shares=None,
                fpr_obs: float = 0.1, fnr_obs: float = 0.2) -> DemoConfig:
    """The demonstration world with its standard rates.

    The three smaller groups share a need rate of 0.4 and opportunity
    rates 0.6/0.3; the majority sits at 0.2 and 0.4/0.2. Only the
    intervention strengths and the group shares are meant to move.
    """
    shares = dict(DEFAULT_DEMO_SHARES if shares is None else shares)
    extra = set(shares) - set(DEMO_GROUPS)
    if extra:
        raise ConfigError("unknown demo group shares: %s" % ", ".join(sorted(extra)))
    missing = set(DEMO_GROUPS) - set(shares)
    if missing:
        raise ConfigError("missing demo group shares: %s" % ", ".join(sorted(missing)))
    strength = {"majority": z_majority, "m1": z_m1, "m2": z_m2,
                "minority": z_minority}

    def build(name):
        if name == "majority":
            need, opp1, opp0 = 0.2, 0.4, 0.2
        else:
            need, opp1, opp0 = 0.4, 0.6, 0.3
        return DemoGroup(need=need, opportunity_need=opp1,
                         opportunity_no_need=opp0, strength=strength[name],
                         share=shares[name])

    return DemoConfig(majority=build("majority"), m1=build("m1"),
                      m2=build("m2"), minority=build("minority"),
                      fpr_obs=fpr_obs, fnr_obs=fnr_obs)


@dataclass(frozen=True)
class GeneratedData:
    """A dataset plus the latents only a generator can know."""

    dataset: Dataset
    y0: np.ndarray
    y1: np.ndarray
    pi_true: np.ndarray
    role: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ConfigError("role must be one of %s" % (ROLES,))
        for name in ("y0", "y1"):
            arr = np.array(getattr(self, name), dtype=np.int8, copy=True)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        pi = np.array(self.pi_true, dtype=float, copy=True)
        pi.flags.writeable = False
        object.__setattr__(self, "pi_true", pi)
        ds = self.dataset
        expected = (1 - ds.d) * self.y0 + ds.d * self.y1
        if not np.array_equal(ds.y, expected):
            raise DomainError("observed outcomes break the consistency "
                              "identity y = (1-d)*y0 + d*y1")
        if np.any(self.y1[self.y0 == 0] != 0):
            raise DomainError("treatment may not create the event: y1 must "
                              "be 0 wherever y0 is 0")

    @property
    def n(self) -> int:
        return self.dataset.n

    def true_propensity(self) -> PropensityEstimate:
        """The generating treatment probabilities, packaged for the
        weighted estimator."""
        return PropensityEstimate.from_probabilities(self.pi_true,
                                                     method="true-dgp")


def generate_demo_data(cfg: DemoConfig, n: int, seed=0) -> GeneratedData:
    """Sample the demonstration world.

    Treatment here responds to latent need itself, so estimators that
    assume treatment is explainable by recorded fields are knowingly
    misspecified on this output; it is meant for truth-level analysis.
    """
    if n < 1:
        raise ConfigError("n must be positive")
    rng = np.random.default_rng(seed)
    groups = cfg.groups()
    shares = np.array([g.share for g in groups])
    codes = np.array([_DEMO_CODES[name] for name in DEMO_GROUPS])
    g = rng.choice(len(groups), size=n, p=shares)
    a = codes[g]
    need = np.array([grp.need for grp in groups])[g]
    y0 = (rng.random(n) < need).astype(np.int8)
    opp1 = np.array([grp.opportunity_need for grp in groups])[g]
    opp0 = np.array([grp.opportunity_no_need for grp in groups])[g]
    p_d = np.where(y0 == 1, opp1, opp0)
    d = (rng.random(n) < p_d).astype(np.int8)
    survive = 1.0 - np.array([grp.strength for grp in groups])[g]
    y1 = np.where(y0 == 1, rng.random(n) < survive, False).astype(np.int8)
    y = ((1 - d) * y0 + d * y1).astype(np.int8)
    u = rng.random(n)
    s = np.where(y == 1, u < 1.0 - cfg.fnr_obs, u < cfg.fpr_obs).astype(np.int8)
    x = np.empty((n, 0))
    # explicit level labels keep both characteristics two-level even if a
    # small sample misses a level
    ds = dataset_from_arrays(a, d, y, x, s,
                             level_labels=(("0", "1"), ("0", "1")))
    return GeneratedData(dataset=ds, y0=y0, y1=y1, pi_true=p_d,
                         role="validation")


def _demo_group(cfg: DemoConfig, group) -> DemoGroup:
    if isinstance(group, str):
        return cfg.group(group)
    key = tuple(int(v) for v in group)
    for name, code in _DEMO_CODES.items():
        if code == key:
            return cfg.group(name)
    raise ConfigError("unknown demo group %r" % (group,))


def true_demo_cfnr(cfg: DemoConfig, group) -> float:
    """Closed-form counterfactual false-negative rate for one group.

    Given need, a record is treated-and-helped with probability q*z, in
    which case its observed outcome flips to 0 and the score misses with
    probability 1-fpr_obs; otherwise the score misses at fnr_obs.
    """
    grp = _demo_group(cfg, group)
    q, z = grp.opportunity_need, grp.strength
    return cfg.fnr_obs + q * z * ((1.0 - cfg.fpr_obs) - cfg.fnr_obs)


def true_demo_cfpr(cfg: DemoConfig, group) -> float:
    """Counterfactual false-positive rate; the generator pins it to the
    observational value because treatment never creates the event."""
    _demo_group(cfg, group)
    return cfg.fpr_obs


# -- scenario generator -------------------------------------------------------

@dataclass(frozen=True)
class ScenarioConfig:
    """The estimation benchmark's generating parameters.

    Need/opportunity rates are given for the majority, the two mid-sized
    groups (shared value), and the minority; coefficients on the
    protected columns are chosen so those rates hold at the covariate
    means. `score_coefficient` only enters estimation-role treatment.
    """

    scenario: int
    need_majority: float
    need_mid: float
    need_minority: float
    opportunity_majority: float
    opportunity_mid: float
    opportunity_minority: float
    z_m1: float
    z_m2: float
    z_minority: float
    predictors: str
    y1_majority: float = 0.8
    group_probabilities: tuple = (0.58, 0.23, 0.13, 0.06)
    covariate_means: tuple = (1.0, -1.0, 2.0, -2.0)
    covariate_sd: float = 0.3
    clip_lo: float = 0.005
    clip_hi: float = 0.995
    score_coefficient: float = _SCORE_COEFFICIENT
    cutoff: float = 0.5

    def __post_init__(self):
        for name in ("need_majority", "need_mid", "need_minority",
                     "opportunity_majority", "opportunity_mid",
                     "opportunity_minority"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ConfigError("%s must lie strictly inside (0, 1)" % name)
        for name in ("z_m1", "z_m2", "z_minority", "y1_majority", "cutoff"):
            _check_prob(getattr(self, name), name)
        if self.predictors not in PREDICTOR_SETS:
            raise ConfigError("predictors must be one of %s"
                              % (PREDICTOR_SETS,))
        probs = tuple(self.group_probabilities)
        if len(probs) != 4 or abs(sum(probs) - 1.0) > 1e-9:
            raise ConfigError("group probabilities must be 4 values summing to 1")
        if not 0.0 < self.clip_lo < self.clip_hi < 1.0:
            raise ConfigError("clip bounds must satisfy 0 < lo < hi < 1")

    def beta_need(self) -> np.ndarray:
        lo, mid, mn = (logit(self.need_majority), logit(self.need_mid),
                       logit(self.need_minority))
        return np.array([mid - lo, mid - lo, lo - 2.0 * mid + mn])

    def beta_opportunity(self) -> np.ndarray:
        lo, mid, mn = (logit(self.opportunity_majority),
                       logit(self.opportunity_mid),
                       logit(self.opportunity_minority))
        return np.array([mid - lo, mid - lo, lo - 2.0 * mid + mn])


def scenario_config(scenario: int) -> ScenarioConfig:
    """The three stock benchmark worlds.

    1 keeps counterfactual error rates similar everywhere (only the
    minority's intervention strength stands out); 2 spreads intervention
    strengths so several groups diverge; 3 concentrates need and
    opportunity differences on the majority.
    """
    if scenario == 1:
        return ScenarioConfig(scenario=1, need_majority=0.6, need_mid=0.5,
                              need_minority=0.4, opportunity_majority=0.2,
                              opportunity_mid=0.4, opportunity_minority=0.6,
                              z_m1=0.2, z_m2=0.2, z_minority=0.6,
                              predictors="x-only")
    if scenario == 2:
        return ScenarioConfig(scenario=2, need_majority=0.6, need_mid=0.5,
                              need_minority=0.4, opportunity_majority=0.2,
                              opportunity_mid=0.4, opportunity_minority=0.6,
                              z_m1=0.3, z_m2=0.4, z_minority=0.5,
                              predictors="protected-and-x")
    if scenario == 3:
        return ScenarioConfig(scenario=3, need_majority=0.8, need_mid=0.4,
                              need_minority=0.4, opportunity_majority=0.4,
                              opportunity_mid=0.6, opportunity_minority=0.6,
                              z_m1=0.2, z_m2=0.2, z_minority=0.2,
                              predictors="protected-and-x")
    raise ConfigError("scenario must be 1, 2, or 3; got %r" % (scenario,))


def _feature_matrix(predictors: str, a, x) -> np.ndarray:
    if predictors == "x-only":
        return np.asarray(x, dtype=float)
    return np.column_stack([np.asarray(a, dtype=float),
                            np.asarray(x, dtype=float)])


@dataclass(frozen=True)
class RiskModel:
    """A trained risk predictor plus the contract for applying it."""

    forest: ForestModel
    predictors: str
    cutoff: float = 0.5

    def feature_matrix(self, a, x) -> np.ndarray:
        return _feature_matrix(self.predictors, a, x)

    def probabilities(self, a, x) -> np.ndarray:
        return predict_forest(self.forest, self.feature_matrix(a, x))

    def scores(self, a, x) -> np.ndarray:
        p = self.probabilities(a, x)
        return (p >= self.cutoff).astype(np.int8)

    def score_dataset(self, ds: Dataset) -> np.ndarray:
        return self.scores(ds.a, ds.x)


def generate_scenario_data(cfg: ScenarioConfig, role: str, n: int, seed=0,
                           risk_model: Optional[RiskModel] = None
                           ) -> GeneratedData:
    """Sample one scenario cohort.

    Train- and validation-role cohorts carry an all-zero score column:
    they describe the world before the model acts, and treatment there
    ignores the score. Estimation-role cohorts score every record with
    the supplied risk model and let treatment respond to that score,
    which is why the model is required.
    """
    if role not in ROLES:
        raise ConfigError("role must be one of %s, got %r" % (ROLES, role))
    if n < 1:
        raise ConfigError("n must be positive")
    if role == "estimation" and risk_model is None:
        raise ConfigError("estimation-role data needs the trained risk "
                          "model: treatment assignment responds to the score")
    rng = np.random.default_rng(seed)
    codes = np.array([(0, 0), (1, 0), (0, 1), (1, 1)])
    g = rng.choice(4, size=n, p=np.asarray(cfg.group_probabilities))
    a = codes[g]
    x = rng.normal(loc=cfg.covariate_means, scale=cfg.covariate_sd,
                   size=(n, 4))
    a_star = np.column_stack([a[:, 0], a[:, 1], a[:, 0] * a[:, 1]])

    p_y0 = expit(logit(cfg.need_majority) + x.sum(axis=1)
                 + a_star @ cfg.beta_need())
    p_y0 = np.clip(p_y0, cfg.clip_lo, cfg.clip_hi)
    y0 = (rng.random(n) < p_y0).astype(np.int8)

    survive = np.array([cfg.y1_majority, 1.0 - cfg.z_m1, 1.0 - cfg.z_m2,
                        1.0 - cfg.z_minority])[g]
    p_y1 = np.where(y0 == 1, survive, 0.0)
    y1 = (rng.random(n) < p_y1).astype(np.int8)

    if role == "estimation":
        s = risk_model.scores(a, x)
    else:
        s = np.zeros(n, dtype=np.int8)

    linear = (logit(cfg.opportunity_majority) + x[:, 0] + x[:, 1]
              + a_star @ cfg.beta_opportunity())
    if role == "estimation":
        linear = linear + cfg.score_coefficient * s
    p_d = np.clip(expit(linear), cfg.clip_lo, cfg.clip_hi)
    d = (rng.random(n) < p_d).astype(np.int8)
    y = ((1 - d) * y0 + d * y1).astype(np.int8)

    ds = dataset_from_arrays(a, d, y, x, s,
                             level_labels=(("0", "1"), ("0", "1")))
    return GeneratedData(dataset=ds, y0=y0, y1=y1, pi_true=p_d, role=role)


def train_risk_model(train: GeneratedData, cfg: ScenarioConfig, *,
                     n_trees: int = 100, max_depth: int = 8,
                     min_leaf: int = 5, seed=0) -> RiskModel:
    """Fit the random-forest risk predictor on a train-role cohort."""
    if train.role != "train":
        raise ConfigError("risk models are fit on train-role data, got %r"
                          % (train.role,))
    features = _feature_matrix(cfg.predictors, train.dataset.a,
                               train.dataset.x)
    forest = fit_random_forest(features, train.dataset.y, n_trees=n_trees,
                               max_depth=max_depth, min_leaf=min_leaf,
                               seed=seed)
    return RiskModel(forest=forest, predictors=cfg.predictors,
                     cutoff=cfg.cutoff)


# -- ground truth -------------------------------------------------------------

@dataclass(frozen=True)
class GroundTruth:
    """Counterfactual truth counted directly from potential outcomes."""

    table: ErrorRateTable
    marginals: tuple
    observational: ErrorRateTable
    suites: dict                 # kind -> MetricSuite

    def suite(self, kind: str):
        if kind not in self.suites:
            raise ConfigError("unknown rate kind %r" % (kind,))
        return self.suites[kind]

    def rate(self, group, which: str) -> Optional[float]:
        return self.table.rate(group, which)


def compute_truth(data: GeneratedData, model: Optional[RiskModel] = None,
                  normalization: str = "pair-mean") -> GroundTruth:
    """Count true error rates against y0 and assemble truth metrics.

    With a risk model, records are scored here (the usual path for
    validation cohorts, whose stored score column is a placeholder);
    without one, the stored scores are taken as-is (the demo generator's
    output arrives ready-scored).
    """
    ds = data.dataset
    if model is not None:
        ds = dataclasses.replace(ds, s=model.score_dataset(ds))
    gi = enumerate_groups(ds)
    group_ids = group_codes(ds)
    labels = tuple(ds.group_labels(g) for g in gi.groups)
    cells = observational_rate_cells(data.y0, ds.s, group_ids, len(gi.groups))
    rows, _ = _build_rows(ds, gi.groups, labels, group_ids, cells)
    table = ErrorRateTable(kind="counterfactual-truth", method="truth",
                           rows=tuple(rows))
    marginals = []
    for j in range(ds.n_characteristics):
        level_ids = ds.a[:, j]
        n_levels = len(ds.level_maps[j])
        level_groups = tuple((code,) for code in range(n_levels))
        level_labels = tuple((ds.level_labels(j)[code],)
                             for code in range(n_levels))
        level_cells = observational_rate_cells(data.y0, ds.s, level_ids,
                                               n_levels)
        level_rows, _ = _build_rows(ds, level_groups, level_labels, level_ids,
                                    level_cells)
        marginals.append(ErrorRateTable(kind="counterfactual-truth",
                                        method="truth",
                                        rows=tuple(level_rows)))
    marginals = tuple(marginals)
    observational = error_rate_table(ds, gi, "observational")
    suites = {kind: suite_from_tables(table, marginals, observational, kind,
                                      normalization) for kind in KINDS}
    return GroundTruth(table=table, marginals=marginals,
                       observational=observational, suites=suites)


# -- demonstration sweep ------------------------------------------------------

@dataclass(frozen=True)
class SweepPoint:
    z: float
    vary: str
    truth: GroundTruth


def demo_sweep(z_values, n: int = 50000, seed: int = 0,
               vary: str = "minority", shares=None,
               normalization: str = "pair-mean") -> tuple:
    """Truth-level metrics along an intervention-strength sweep.

    ``vary="minority"`` moves the minority's strength with the rest held
    at 0.2; ``vary="mid"`` pins the minority at 0.8 and moves the two
    mid-sized groups together, which evens out the disparity spread.
    """
    points = []
    for i, z in enumerate(z_values):
        if vary == "minority":
            cfg = demo_config(z_minority=float(z), shares=shares)
        elif vary == "mid":
            cfg = demo_config(z_minority=0.8, z_m1=float(z), z_m2=float(z),
                              shares=shares)
        else:
            raise ConfigError("vary must be 'minority' or 'mid', got %r"
                              % (vary,))
        data = generate_demo_data(cfg, n, seed=[seed, _TAG_SWEEP, i])
        points.append(SweepPoint(z=float(z), vary=vary,
                                 truth=compute_truth(
                                     data, normalization=normalization)))
    return tuple(points)


# -- replication grid ---------------------------------------------------------

@dataclass(frozen=True)
class GridCell:
    scenario: int
    n: int
    method: str
    replicate: int
    suites: dict                 # kind -> MetricSuite
    rates: ErrorRateTable
    redrawn: bool


@dataclass(frozen=True)
class ReplicationGrid:
    cells: tuple
    truths: dict                 # scenario -> GroundTruth
    scenarios: tuple
    sizes: tuple
    methods: tuple
    replicates: int
    seed: int
    normalization: str
    flagged: tuple               # (scenario, n) pairs with >1% redraws

    def cell_values(self, scenario, n, method, kind, metric) -> np.ndarray:
        vals = [c.suites[kind].values()[metric] for c in self.cells
                if c.scenario == scenario and c.n == n and c.method == method]
        return np.array(vals)

    def summary_rows(self) -> list:
        """Mean and 2.5/97.5 percent quantiles per grid cell and metric."""
        rows = []
        for scenario in self.scenarios:
            truth = self.truths[scenario]
            for n in self.sizes:
                for method in self.methods:
                    for kind in KINDS:
                        truth_values = truth.suite(kind).values()
                        for metric in ("avg", "max", "var", "marg", "obs"):
                            vals = self.cell_values(scenario, n, method,
                                                    kind, metric)
                            lo, hi = np.quantile(vals, [0.025, 0.975])
                            rows.append({
                                "scenario": scenario, "n": n,
                                "method": method, "kind": kind,
                                "metric": metric,
                                "mean": float(vals.mean()),
                                "q025": float(lo), "q975": float(hi),
                                "truth": truth_values[metric],
                                "flagged": (scenario, n) in self.flagged,
                            })
        return rows

    def rate_rows(self, method: str, n: int) -> list:
        """Per-group replication summaries of the estimated rates."""
        rows = []
        for scenario in self.scenarios:
            truth = self.truths[scenario]
            cells = [c for c in self.cells
                     if c.scenario == scenario and c.n == n
                     and c.method == method]
            if not cells:
                continue
            for group in cells[0].rates.groups:
                label = "/".join(cells[0].rates.row(group).labels)
                for which in ("fpr", "fnr"):
                    vals = np.array([c.rates.rate(group, which)
                                     for c in cells
                                     if c.rates.rate(group, which) is not None])
                    if vals.size == 0:
                        mean = lo = hi = float("nan")
                    else:
                        mean = float(vals.mean())
                        lo, hi = (float(q) for q in
                                  np.quantile(vals, [0.025, 0.975]))
                    truth_rate = truth.rate(group, which)
                    rows.append({
                        "scenario": scenario, "group": label, "rate": which,
                        "mean": mean, "q025": lo, "q975": hi,
                        "truth": (float("nan") if truth_rate is None
                                  else truth_rate),
                        "defined": int(vals.size),
                    })
        return rows


def _audit_once(data: GeneratedData, method: str, normalization: str,
                nuisance_seed) -> tuple:
    """All suites plus the main rate table for one method on one cohort."""
    ds = data.dataset
    gi = enumerate_groups(ds)
    propensity = regressions = None
    if method == "weighted-glm":
        propensity = cross_fit_propensity(ds, learner="glm")
    elif method == "weighted-ensemble":
        propensity = cross_fit_propensity(ds, learner="ensemble",
                                          seed=nuisance_seed)
    elif method == "weighted-true":
        propensity = data.true_propensity()
    elif method == "regression":
        regressions = fit_outcome_regressions(ds)
    main = error_rate_table(ds, gi, method, propensity=propensity,
                            regressions=regressions)
    marginals = marginal_error_rate_tables(ds, method, propensity=propensity,
                                           regressions=regressions)
    obs = main if method == "observational" else \
        error_rate_table(ds, gi, "observational")
    suites = {kind: suite_from_tables(main, marginals, obs, kind,
                                      normalization) for kind in KINDS}
    return suites, main


def _scenario_fixtures(cfg: ScenarioConfig, seed: int, n_train: int,
                       n_validation: int, normalization: str):
    """Train the audited model once and establish its truth."""
    si = cfg.scenario
    train = generate_scenario_data(cfg, "train", n_train,
                                   seed=[seed, _TAG_TRAIN, si])
    model = train_risk_model(train, cfg,
                             seed=np.random.SeedSequence(
                                 [seed, _TAG_FOREST, si]))
    validation = generate_scenario_data(cfg, "validation", n_validation,
                                        seed=[seed, _TAG_VALIDATION, si])
    truth = compute_truth(validation, model, normalization=normalization)
    return model, truth


def _as_configs(scenarios) -> tuple:
    configs = []
    for sc in scenarios:
        configs.append(sc if isinstance(sc, ScenarioConfig)
                       else scenario_config(int(sc)))
    return tuple(configs)


def replicate(scenarios, sizes, methods, replicates: int, *, seed: int = 0,
              n_train: int = 1000, n_validation: int = 50000,
              normalization: str = "pair-mean", threads: int = 1
              ) -> ReplicationGrid:
    """Run the scenario x size x method replication grid.

    Within one (scenario, size, replicate) every method sees the same
    estimation cohort, so method comparisons are paired. If any method
    finds a cohort infeasible the cohort is redrawn for all of them (at
    most five attempts); a (scenario, size) cell where more than 1% of
    replicates needed redraws is flagged.
    """
    configs = _as_configs(scenarios)
    sizes = tuple(int(n) for n in sizes)
    methods = tuple(methods)
    for method in methods:
        if method not in METHODS:
            raise ConfigError("unknown estimation method %r" % (method,))
    if replicates < 1:
        raise ConfigError("replicates must be positive")
    if len(set(c.scenario for c in configs)) != len(configs):
        raise ConfigError("scenario ids must be distinct")

    cells = []
    truths = {}
    flagged = []
    for cfg in configs:
        si = cfg.scenario
        model, truth = _scenario_fixtures(cfg, seed, n_train, n_validation,
                                          normalization)
        truths[si] = truth
        for ni, n in enumerate(sizes):
            def one_rep(r, _n=n, _ni=ni, _model=model, _cfg=cfg, _si=si):
                for attempt in range(_GRID_ATTEMPTS):
                    data = generate_scenario_data(
                        _cfg, "estimation", _n,
                        seed=[seed, _TAG_ESTIMATION, _si, _ni, r, attempt],
                        risk_model=_model)
                    try:
                        per_method = {}
                        for method in methods:
                            per_method[method] = _audit_once(
                                data, method, normalization,
                                np.random.SeedSequence(
                                    [seed, _TAG_NUISANCE, _si, _ni, r]))
                        return per_method, attempt > 0
                    except InfeasibilityError:
                        continue
                raise ResamplingExhaustedError(
                    "scenario %d at n=%d: replicate %d stayed infeasible "
                    "after %d attempts" % (_si, _n, r, _GRID_ATTEMPTS))

            if threads > 1:
                with ThreadPoolExecutor(max_workers=threads) as pool:
                    results = list(pool.map(one_rep, range(replicates)))
            else:
                results = [one_rep(r) for r in range(replicates)]
            n_redrawn = sum(1 for _, re in results if re)
            if n_redrawn > 0.01 * replicates:
                flagged.append((si, n))
            for r, (per_method, redrawn) in enumerate(results):
                for method in methods:
                    suites, main = per_method[method]
                    cells.append(GridCell(scenario=si, n=n, method=method,
                                          replicate=r, suites=suites,
                                          rates=main, redrawn=redrawn))
    return ReplicationGrid(cells=tuple(cells), truths=truths,
                           scenarios=tuple(c.scenario for c in configs),
                           sizes=sizes, methods=methods,
                           replicates=replicates, seed=seed,
                           normalization=normalization,
                           flagged=tuple(flagged))


# -- interval coverage --------------------------------------------------------

@dataclass(frozen=True)
class CoverageReplicate:
    scenario: int
    n: int
    replicate: int
    estimate: float
    se: float
    intervals: dict              # interval method -> ConfidenceInterval
    redrawn: bool


@dataclass(frozen=True)
class CoverageStudy:
    scenario: int
    sizes: tuple
    replicates: int
    spec: MetricSpec
    alpha: float
    resamples: int
    truth: float
    rows: tuple
    seed: int

    def summary_rows(self) -> list:
        """Coverage and average lengths per size and interval style."""
        out = []
        for n in self.sizes:
            rows = [r for r in self.rows if r.n == n]
            for name in ("t", "normal", "percentile"):
                covered = [r.intervals[name].lo <= self.truth
                           <= r.intervals[name].hi for r in rows]
                lengths = [r.intervals[name].length for r in rows]
                truncated = [max(r.intervals[name].hi, 0.0)
                             - max(r.intervals[name].lo, 0.0) for r in rows]
                out.append({
                    "scenario": self.scenario, "n": n,
                    "interval_method": name,
                    "coverage": float(np.mean(covered)),
                    "avg_length": float(np.mean(lengths)),
                    "avg_length_truncated": float(np.mean(truncated)),
                })
        return out


def coverage_study(scenario, sizes, replicates: int, *, resamples: int = 1000,
                   alpha: float = 0.1, metric: str = "avg",
                   kind: str = "negative", method: str = "weighted-glm",
                   normalization: str = "pair-mean", m=None, refit: bool = True,
                   seed: int = 0, n_train: int = 1000,
                   n_validation: int = 50000, threads: int = 1
                   ) -> CoverageStudy:
    """Interval coverage against scenario truth.

    Each replicate draws a fresh estimation cohort, runs the rescaled
    bootstrap on it, and records the three interval styles; coverage is
    judged against the validation-cohort truth value.
    """
    cfg = scenario if isinstance(scenario, ScenarioConfig) else \
        scenario_config(int(scenario))
    sizes = tuple(int(n) for n in sizes)
    spec = MetricSpec(metric=metric, kind=kind, method=method,
                      normalization=normalization)
    model, truth = _scenario_fixtures(cfg, seed, n_train, n_validation,
                                      normalization)
    truth_value = float(getattr(truth.suite(kind), metric))
    si = cfg.scenario

    rows = []
    for ni, n in enumerate(sizes):
        def one_rep(r, _n=n, _ni=ni):
            for attempt in range(_GRID_ATTEMPTS):
                data = generate_scenario_data(
                    cfg, "estimation", _n,
                    seed=[seed, _TAG_COVERAGE_DATA, si, _ni, r, attempt],
                    risk_model=model)
                boot_seed = int(np.random.SeedSequence(
                    [seed, _TAG_COVERAGE_BOOT, si, _ni, r, attempt]
                ).generate_state(1, np.uint64)[0])
                try:
                    ds = data.dataset
                    gi = enumerate_groups(ds)
                    boot = rescaled_bootstrap(
                        ds, gi, spec, resamples=resamples, m=m,
                        seed=boot_seed, refit=refit,
                        propensity=(data.true_propensity()
                                    if method == "weighted-true" else None))
                    intervals = {"t": ci_t_interval(boot, alpha),
                                 "normal": ci_normal(boot, alpha),
                                 "percentile": ci_percentile(boot, alpha)}
                    return CoverageReplicate(
                        scenario=si, n=_n, replicate=r,
                        estimate=boot.theta_n, se=boot.se,
                        intervals=intervals, redrawn=attempt > 0)
                except InfeasibilityError:
                    continue
            raise ResamplingExhaustedError(
                "coverage replicate %d at n=%d stayed infeasible after %d "
                "attempts" % (r, _n, _GRID_ATTEMPTS))

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                rows.extend(pool.map(one_rep, range(replicates)))
        else:
            rows.extend(one_rep(r) for r in range(replicates))
    return CoverageStudy(scenario=si, sizes=sizes, replicates=replicates,
                         spec=spec, alpha=alpha, resamples=resamples,
                         truth=truth_value, rows=tuple(rows), seed=seed)
