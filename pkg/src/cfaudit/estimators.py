"""Group-level error rates under the no-treatment counterfactual.

Three estimation routes produce the same table shape: inverse-probability
weighting of untreated records (with a GLM, ensemble, or known treatment
model), plug-in outcome regressions, and the purely observational rates
that ignore treatment altogether. Rates whose denominator has no mass are
reported as explicit ``None`` markers, never as 0 or NaN.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import Dataset, GroupIndex, group_codes
from .errors import AuditInfeasibleError, ConfigError
from .nuisance import OutcomeRegressions, PropensityEstimate

WEIGHTED_METHODS = ("weighted-glm", "weighted-ensemble", "weighted-true")
METHODS = WEIGHTED_METHODS + ("regression", "observational")

# relative floor under which a regression denominator counts as empty
_DEN_FLOOR = 1e-9

_EXPECTED_PROPENSITY = {"weighted-glm": "glm", "weighted-ensemble": "ensemble",
                        "weighted-true": "true-dgp"}


@dataclass(frozen=True)
class RateCell:
    """One estimated rate with its raw numerator and denominator."""

    value: Optional[float]
    numerator: float
    denominator: float

    @property
    def defined(self) -> bool:
        return self.value is not None


@dataclass(frozen=True)
class GroupRates:
    group: tuple
    labels: tuple
    count: int
    untreated: int
    fpr: RateCell
    fnr: RateCell
    weight_min: Optional[float] = None
    weight_max: Optional[float] = None


@dataclass(frozen=True)
class ErrorRateTable:
    """Rates for every group (or level, for marginal tables).

    ``kind`` names what the numbers mean; ``method`` names how they were
    obtained. Rows follow the enumeration order of the group index.
    """

    kind: str
    method: str
    rows: tuple
    n_clipped: int = 0

    @property
    def groups(self) -> tuple:
        return tuple(r.group for r in self.rows)

    def row(self, group) -> GroupRates:
        key = tuple(group)
        for r in self.rows:
            if r.group == key:
                return r
        raise KeyError("unknown group %r" % (key,))

    def rate(self, group, which: str) -> Optional[float]:
        cell = getattr(self.row(group), which)
        return cell.value

    def n_undefined(self, which: str) -> int:
        return sum(1 for r in self.rows if not getattr(r, which).defined)


# -- vectorized cell builders ----------------------------------------------

def weighted_rate_cells(d, y, s, weights, group_ids, n_groups):
    """Sum weighted numerators/denominators per group.

    Returns four arrays: fpr numerator, fpr denominator, fnr numerator,
    fnr denominator. The estimand conditions on remaining untreated, so
    treated records contribute nothing.
    """
    d = np.asarray(d)
    y = np.asarray(y)
    s = np.asarray(s)
    w = np.asarray(weights, dtype=float)
    base = w * (d == 0)
    fpr_den_c = base * (y == 0)
    fpr_num_c = fpr_den_c * (s == 1)
    fnr_den_c = base * (y == 1)
    fnr_num_c = fnr_den_c * (s == 0)
    out = tuple(np.bincount(group_ids, weights=c, minlength=n_groups)
                for c in (fpr_num_c, fpr_den_c, fnr_num_c, fnr_den_c))
    return out


def observational_rate_cells(y, s, group_ids, n_groups):
    """Plain factual error-rate counts per group (all records)."""
    ones = np.ones(len(y))
    y = np.asarray(y)
    s = np.asarray(s)
    fpr_den_c = ones * (y == 0)
    fpr_num_c = fpr_den_c * (s == 1)
    fnr_den_c = ones * (y == 1)
    fnr_num_c = fnr_den_c * (s == 0)
    return tuple(np.bincount(group_ids, weights=c, minlength=n_groups)
                 for c in (fpr_num_c, fpr_den_c, fnr_num_c, fnr_den_c))


def regression_rate_cells(s, mu0_at_s1, mu0_at_s0, mu0_star, group_ids, n_groups):
    """Plug-in numerators/denominators per group from outcome regressions."""
    s = np.asarray(s)
    fpr_num_c = (1.0 - np.asarray(mu0_at_s1)) * (s == 1)
    fpr_den_c = 1.0 - np.asarray(mu0_star)
    fnr_num_c = np.asarray(mu0_at_s0) * (s == 0)
    fnr_den_c = np.asarray(mu0_star)
    return tuple(np.bincount(group_ids, weights=c, minlength=n_groups)
                 for c in (fpr_num_c, fpr_den_c, fnr_num_c, fnr_den_c))


def _cell(num: float, den: float) -> RateCell:
    if den <= 0.0:
        return RateCell(value=None, numerator=float(num), denominator=float(den))
    return RateCell(value=float(num / den), numerator=float(num),
                    denominator=float(den))


def _regression_cell(num, den, members):
    # a denominator that is numerically empty relative to the group size
    # means the model leaves no mass on the conditioning event
    if members == 0 or den / members <= _DEN_FLOOR:
        return RateCell(value=None, numerator=float(num), denominator=float(den)), 0
    value = num / den
    clipped = 0
    if value < 0.0:
        value, clipped = 0.0, 1
    elif value > 1.0:
        value, clipped = 1.0, 1
    return RateCell(value=float(value), numerator=float(num),
                    denominator=float(den)), clipped


# -- single-group operations -------------------------------------------------

def _group_mask(ds: Dataset, group) -> np.ndarray:
    key = tuple(group)
    mask = np.ones(ds.n, dtype=bool)
    for j, code in enumerate(key):
        mask &= ds.a[:, j] == code
    return mask


def counterfactual_fpr(ds: Dataset, propensity: PropensityEstimate,
                       group) -> Optional[float]:
    """Weighted share of untreated, truly-negative group members flagged."""
    w = propensity.untreated_weights()
    base = _group_mask(ds, group) & (ds.d == 0) & (ds.y == 0)
    den = float(w[base].sum())
    if den <= 0.0:
        return None
    num = float(w[base & (ds.s == 1)].sum())
    return num / den


def counterfactual_fnr(ds: Dataset, propensity: PropensityEstimate,
                       group) -> Optional[float]:
    """Weighted share of untreated, truly-positive group members missed."""
    w = propensity.untreated_weights()
    base = _group_mask(ds, group) & (ds.d == 0) & (ds.y == 1)
    den = float(w[base].sum())
    if den <= 0.0:
        return None
    num = float(w[base & (ds.s == 0)].sum())
    return num / den


def regression_cfpr(ds: Dataset, regressions: OutcomeRegressions,
                    group) -> Optional[float]:
    mask = _group_mask(ds, group)
    mu0_s1 = regressions.predict_mu0(ds, score_value=1)
    mu0_star = regressions.predict_mu0_star(ds)
    num = float(((1.0 - mu0_s1) * (ds.s == 1))[mask].sum())
    den = float((1.0 - mu0_star)[mask].sum())
    cell, _ = _regression_cell(num, den, int(mask.sum()))
    return cell.value


def regression_cfnr(ds: Dataset, regressions: OutcomeRegressions,
                    group) -> Optional[float]:
    mask = _group_mask(ds, group)
    mu0_s0 = regressions.predict_mu0(ds, score_value=0)
    mu0_star = regressions.predict_mu0_star(ds)
    num = float((mu0_s0 * (ds.s == 0))[mask].sum())
    den = float(mu0_star[mask].sum())
    cell, _ = _regression_cell(num, den, int(mask.sum()))
    return cell.value


def observational_rates(ds: Dataset, group):
    """Factual (false positive, false negative) rates for one group."""
    mask = _group_mask(ds, group)
    neg = mask & (ds.y == 0)
    pos = mask & (ds.y == 1)
    fpr = float((ds.s[neg] == 1).mean()) if neg.any() else None
    fnr = float((ds.s[pos] == 0).mean()) if pos.any() else None
    return fpr, fnr


# -- full tables --------------------------------------------------------------

def _build_rows(ds, groups, labels, group_ids, cells, weights=None,
                regression_members=None):
    fpr_num, fpr_den, fnr_num, fnr_den = cells
    n_groups = len(groups)
    counts = np.bincount(group_ids, minlength=n_groups)
    untreated_ids = group_ids[np.asarray(ds.d) == 0]
    untreated = np.bincount(untreated_ids, minlength=n_groups)
    wmin = wmax = None
    if weights is not None:
        wmin = np.full(n_groups, np.inf)
        wmax = np.full(n_groups, -np.inf)
        w_un = np.asarray(weights)[np.asarray(ds.d) == 0]
        np.minimum.at(wmin, untreated_ids, w_un)
        np.maximum.at(wmax, untreated_ids, w_un)
    rows = []
    n_clipped = 0
    for g in range(n_groups):
        if regression_members is not None:
            fpr_cell, c1 = _regression_cell(fpr_num[g], fpr_den[g], counts[g])
            fnr_cell, c2 = _regression_cell(fnr_num[g], fnr_den[g], counts[g])
            n_clipped += c1 + c2
        else:
            fpr_cell = _cell(fpr_num[g], fpr_den[g])
            fnr_cell = _cell(fnr_num[g], fnr_den[g])
        has_w = weights is not None and untreated[g] > 0
        rows.append(GroupRates(
            group=groups[g], labels=labels[g], count=int(counts[g]),
            untreated=int(untreated[g]), fpr=fpr_cell, fnr=fnr_cell,
            weight_min=float(wmin[g]) if has_w else None,
            weight_max=float(wmax[g]) if has_w else None))
    return rows, n_clipped


def _require(cond, message):
    if not cond:
        raise ConfigError(message)


def error_rate_table(ds: Dataset, gi: GroupIndex, method: str, *,
                     propensity: Optional[PropensityEstimate] = None,
                     regressions: Optional[OutcomeRegressions] = None
                     ) -> ErrorRateTable:
    """Estimate both error rates for every intersectional group."""
    if method not in METHODS:
        raise ConfigError("unknown estimation method %r; expected one of %s"
                          % (method, ", ".join(METHODS)))
    group_ids = group_codes(ds)
    groups = gi.groups
    labels = tuple(ds.group_labels(g) for g in groups)
    n_groups = len(groups)
    if method in WEIGHTED_METHODS:
        _require(propensity is not None,
                 "method %r needs a propensity estimate" % method)
        _require(propensity.method == _EXPECTED_PROPENSITY[method],
                 "method %r got propensity fitted as %r"
                 % (method, propensity.method))
        w = propensity.untreated_weights()
        cells = weighted_rate_cells(ds.d, ds.y, ds.s, w, group_ids, n_groups)
        rows, _ = _build_rows(ds, groups, labels, group_ids, cells, weights=w)
        table = ErrorRateTable(kind="counterfactual-weighted", method=method,
                               rows=tuple(rows))
    elif method == "regression":
        _require(regressions is not None,
                 "method 'regression' needs fitted outcome regressions")
        cells = regression_rate_cells(ds.s,
                                      regressions.predict_mu0(ds, score_value=1),
                                      regressions.predict_mu0(ds, score_value=0),
                                      regressions.predict_mu0_star(ds),
                                      group_ids, n_groups)
        rows, n_clipped = _build_rows(ds, groups, labels, group_ids, cells,
                                      regression_members=True)
        table = ErrorRateTable(kind="counterfactual-regression",
                               method=method, rows=tuple(rows),
                               n_clipped=n_clipped)
    else:
        cells = observational_rate_cells(ds.y, ds.s, group_ids, n_groups)
        rows, _ = _build_rows(ds, groups, labels, group_ids, cells)
        table = ErrorRateTable(kind="observational", method=method,
                               rows=tuple(rows))
    if all(not r.fpr.defined and not r.fnr.defined for r in table.rows):
        raise AuditInfeasibleError(
            "every group rate is undefined under method %r" % method)
    return table


def marginal_error_rate_tables(ds: Dataset, method: str, *,
                               propensity: Optional[PropensityEstimate] = None,
                               regressions: Optional[OutcomeRegressions] = None
                               ) -> tuple:
    """One single-characteristic table per protected characteristic.

    Marginal rates pool over the other characteristics, so a level's rate
    is generally not an average of its intersectional refinements.
    """
    if method not in METHODS:
        raise ConfigError("unknown estimation method %r" % (method,))
    tables = []
    for j in range(ds.n_characteristics):
        group_ids = ds.a[:, j]
        n_levels = len(ds.level_maps[j])
        groups = tuple((code,) for code in range(n_levels))
        labels = tuple((ds.level_labels(j)[code],) for code in range(n_levels))
        if method in WEIGHTED_METHODS:
            _require(propensity is not None,
                     "method %r needs a propensity estimate" % method)
            w = propensity.untreated_weights()
            cells = weighted_rate_cells(ds.d, ds.y, ds.s, w, group_ids, n_levels)
            rows, _ = _build_rows(ds, groups, labels, group_ids, cells, weights=w)
            tables.append(ErrorRateTable(kind="counterfactual-weighted",
                                         method=method, rows=tuple(rows)))
        elif method == "regression":
            _require(regressions is not None,
                     "method 'regression' needs fitted outcome regressions")
            cells = regression_rate_cells(
                ds.s, regressions.predict_mu0(ds, score_value=1),
                regressions.predict_mu0(ds, score_value=0),
                regressions.predict_mu0_star(ds), group_ids, n_levels)
            rows, n_clipped = _build_rows(ds, groups, labels, group_ids, cells,
                                          regression_members=True)
            tables.append(ErrorRateTable(kind="counterfactual-regression",
                                         method=method, rows=tuple(rows),
                                         n_clipped=n_clipped))
        else:
            cells = observational_rate_cells(ds.y, ds.s, group_ids, n_levels)
            rows, _ = _build_rows(ds, groups, labels, group_ids, cells)
            tables.append(ErrorRateTable(kind="observational", method=method,
                                         rows=tuple(rows)))
    return tuple(tables)
