"""Disparity metrics over pairwise error-rate differences.

All metrics summarize absolute pairwise differences of one rate kind
("positive" for false positives, "negative" for false negatives). Two
normalization modes exist: ``pair-mean`` divides by the number of pairs
actually compared, while ``group-denominator`` reproduces the printed
definitions that divide by the number of groups (average, variance) or
the full pair count (marginal), whether or not every pair was usable.
"""

import warnings
from dataclasses import dataclass
from itertools import combinations
from typing import Optional

import numpy as np

from .data import Dataset, GroupIndex
from .errors import ConfigError, MetricInfeasibleError
from .estimators import (ErrorRateTable, error_rate_table,
                         marginal_error_rate_tables)

KINDS = ("positive", "negative")
NORMALIZATIONS = ("pair-mean", "group-denominator")

_RATE_OF_KIND = {"positive": "fpr", "negative": "fnr"}


@dataclass(frozen=True)
class PairDelta:
    a: tuple
    b: tuple
    delta: float            # rate(a) - rate(b)

    @property
    def magnitude(self) -> float:
        return abs(self.delta)


@dataclass(frozen=True)
class PairwiseDeltas:
    """Pairwise rate differences for one rate kind.

    ``excluded`` lists (pair, reason) for comparisons dropped because a
    member rate was undefined; ``n_groups`` is the full group count of
    the source table, which group-denominator normalization uses.
    """

    kind: str
    entries: tuple
    excluded: tuple
    n_groups: int

    @property
    def n_pairs(self) -> int:
        return len(self.entries)

    @property
    def partial(self) -> bool:
        return len(self.excluded) > 0

    def magnitudes(self) -> np.ndarray:
        return np.array([e.magnitude for e in self.entries], dtype=float)


def _check_kind(kind: str) -> str:
    if kind not in KINDS:
        raise ConfigError("unknown rate kind %r; expected 'positive' or "
                          "'negative'" % (kind,))
    return _RATE_OF_KIND[kind]


def _check_normalization(normalization: str) -> None:
    if normalization not in NORMALIZATIONS:
        raise ConfigError("unknown normalization %r; expected one of %s"
                          % (normalization, ", ".join(NORMALIZATIONS)))


def pairwise_differences(table: ErrorRateTable, kind: str) -> PairwiseDeltas:
    """All group-pair rate differences, canonical enumeration order.

    Pairs with an undefined member are excluded with a reason; fewer
    than two defined groups leaves nothing to compare and raises.
    """
    which = _check_kind(kind)
    groups = table.groups
    rates = {g: table.rate(g, which) for g in groups}
    entries, excluded = [], []
    for ga, gb in combinations(groups, 2):
        ra, rb = rates[ga], rates[gb]
        if ra is None or rb is None:
            bad = [str(g) for g, r in ((ga, ra), (gb, rb)) if r is None]
            excluded.append(((ga, gb), "undefined rate for %s" % ", ".join(bad)))
            continue
        entries.append(PairDelta(a=ga, b=gb, delta=ra - rb))
    if not entries:
        raise MetricInfeasibleError(
            "fewer than two groups have a defined %s rate" % which)
    return PairwiseDeltas(kind=kind, entries=tuple(entries),
                          excluded=tuple(excluded), n_groups=len(groups))


def delta_avg(deltas: PairwiseDeltas, normalization: str = "pair-mean") -> float:
    """Average absolute pairwise difference."""
    _check_normalization(normalization)
    mags = deltas.magnitudes()
    if normalization == "pair-mean":
        return float(mags.mean())
    return float(mags.sum() / deltas.n_groups)


def delta_max(deltas: PairwiseDeltas) -> float:
    """Largest absolute pairwise difference."""
    return float(deltas.magnitudes().max())


def max_pair(deltas: PairwiseDeltas) -> tuple:
    """Witness pair for :func:`delta_max`; ties resolve to the earliest
    pair in canonical enumeration order."""
    mags = deltas.magnitudes()
    e = deltas.entries[int(np.argmax(mags))]
    return (e.a, e.b)


def delta_var(deltas: PairwiseDeltas, normalization: str = "pair-mean") -> float:
    """Spread of the absolute pairwise differences.

    Pair-mean mode is the sample variance over compared pairs (0 for a
    single pair, with a warning); group-denominator mode centers at the
    group-normalized average and divides by (group count - 1).
    """
    _check_normalization(normalization)
    mags = deltas.magnitudes()
    if normalization == "pair-mean":
        if mags.size == 1:
            warnings.warn("variance over a single compared pair is 0 by "
                          "convention", stacklevel=2)
            return 0.0
        return float(mags.var(ddof=1))
    center = mags.sum() / deltas.n_groups
    return float(((mags - center) ** 2).sum() / (deltas.n_groups - 1))


def delta_marg(marginal_tables, kind: str,
               normalization: str = "pair-mean") -> float:
    """Average absolute difference between marginal (one-characteristic)
    rates, pooled across characteristics.

    Marginal rates aggregate over the other characteristics, so this
    metric can sit far below the intersectional average when disparity
    concentrates in an intersection.
    """
    which = _check_kind(kind)
    _check_normalization(normalization)
    mags = []
    total_pairs = 0
    for table in marginal_tables:
        groups = table.groups
        total_pairs += len(groups) * (len(groups) - 1) // 2
        defined = [(g, table.rate(g, which)) for g in groups
                   if table.rate(g, which) is not None]
        if len(defined) < 2:
            raise MetricInfeasibleError(
                "a characteristic has fewer than two levels with a "
                "defined %s rate" % which)
        for (ga, ra), (gb, rb) in combinations(defined, 2):
            mags.append(abs(ra - rb))
    mags = np.asarray(mags, dtype=float)
    if normalization == "pair-mean":
        return float(mags.mean())
    return float(mags.sum() / total_pairs)


def delta_obs(ds: Dataset, gi: GroupIndex, kind: str,
              normalization: str = "pair-mean") -> float:
    """Same aggregation as :func:`delta_avg`, over observational rates."""
    table = error_rate_table(ds, gi, "observational")
    return delta_avg(pairwise_differences(table, kind), normalization)


@dataclass(frozen=True)
class MetricSuite:
    """The five disparity metrics for one rate kind, plus bookkeeping."""

    kind: str
    method: str
    normalization: str
    avg: float
    max: float
    var: float
    marg: float
    obs: float
    max_pair: tuple
    n_pairs: int
    n_excluded: int
    partial: bool

    def values(self) -> dict:
        return {"avg": self.avg, "max": self.max, "var": self.var,
                "marg": self.marg, "obs": self.obs}


def suite_from_tables(table: ErrorRateTable, marginal_tables,
                      obs_table: ErrorRateTable, kind: str,
                      normalization: str = "pair-mean") -> MetricSuite:
    """Assemble a :class:`MetricSuite` from already-built tables."""
    deltas = pairwise_differences(table, kind)
    obs_deltas = pairwise_differences(obs_table, kind)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        var = delta_var(deltas, normalization)
    return MetricSuite(
        kind=kind, method=table.method, normalization=normalization,
        avg=delta_avg(deltas, normalization),
        max=delta_max(deltas),
        var=var,
        marg=delta_marg(marginal_tables, kind, normalization),
        obs=delta_avg(obs_deltas, normalization),
        max_pair=max_pair(deltas),
        n_pairs=deltas.n_pairs,
        n_excluded=len(deltas.excluded),
        partial=deltas.partial or obs_deltas.partial)


def metric_suite(ds: Dataset, gi: GroupIndex, method: str, kind: str, *,
                 propensity=None, regressions=None,
                 normalization: str = "pair-mean") -> MetricSuite:
    """Estimate every disparity metric for one rate kind."""
    table = error_rate_table(ds, gi, method, propensity=propensity,
                             regressions=regressions)
    marginals = marginal_error_rate_tables(ds, method, propensity=propensity,
                                           regressions=regressions)
    obs_table = table if method == "observational" else \
        error_rate_table(ds, gi, "observational")
    return suite_from_tables(table, marginals, obs_table, kind, normalization)
