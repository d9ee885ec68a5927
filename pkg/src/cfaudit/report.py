"""Audit reports and delimited output tables.

`run_audit` executes the full pipeline on a loaded dataset — rate
tables, disparity metrics, permutation u-values, rescaled-bootstrap
standard errors and intervals — and returns an :class:`AuditReport`.
The writers here render that report as a hierarchical text file plus
flat plot-data tables, and render replication/coverage results the same
way. Delimited outputs begin with one ``# config:`` comment line so
every file carries its own provenance; data CSVs are the exception
(they follow the plain audit-input format and travel with a
``resolved.cfg`` instead).
"""

import csv
import io
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import __version__
from .data import Dataset, GroupIndex
from .errors import ConfigError, SchemaError
from .estimators import (METHODS, ErrorRateTable, error_rate_table,
                         marginal_error_rate_tables)
from .inference import (METRICS, MetricSpec, bootstrap_distributions,
                        ci_normal, ci_percentile, ci_t_interval,
                        reference_distributions, u_value)
from .metrics import KINDS, suite_from_tables
from .nuisance import (PropensityEstimate, cross_fit_propensity,
                       fit_outcome_regressions)

_RATE_NAMES = {"positive": "fpr", "negative": "fnr"}


# -- audit pipeline -----------------------------------------------------------

@dataclass(frozen=True)
class AuditSettings:
    method: str = "weighted-glm"
    kinds: tuple = KINDS
    normalization: str = "pair-mean"
    permutations: int = 1000
    resamples: int = 1000
    alpha: float = 0.1
    m: Optional[str] = None
    refit: bool = True
    seed: int = 0
    threads: int = 1
    folds: int = 10
    propensity_values: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError("unknown estimation method %r" % (self.method,))
        for kind in self.kinds:
            if kind not in KINDS:
                raise ConfigError("unknown rate kind %r" % (kind,))
        if self.method == "weighted-true" and self.propensity_values is None:
            raise ConfigError("method 'weighted-true' needs given treatment "
                              "probabilities; name a propensity_column in "
                              "the config")


@dataclass(frozen=True)
class KindSection:
    """Inference results for one rate kind."""

    kind: str
    suite: object                # MetricSuite
    u_values: dict               # metric -> float
    standard_errors: dict        # metric -> float
    intervals: dict              # metric -> {style -> ConfidenceInterval}
    reference_samples: dict      # metric -> read-only array


@dataclass(frozen=True)
class AuditReport:
    version: str
    config_lines: tuple
    n: int
    method: str
    alpha: float
    table: ErrorRateTable
    marginals: tuple
    observational: ErrorRateTable
    sections: dict               # kind -> KindSection
    diagnostics: dict

    def section(self, kind: str) -> KindSection:
        return self.sections[kind]


def run_audit(ds: Dataset, gi: GroupIndex, st: AuditSettings,
              config_lines=()) -> AuditReport:
    """Rates, metrics, u-values, and intervals for one dataset."""
    propensity = regressions = None
    if st.method == "weighted-glm":
        propensity = cross_fit_propensity(ds, learner="glm", folds=st.folds)
    elif st.method == "weighted-ensemble":
        propensity = cross_fit_propensity(
            ds, learner="ensemble", folds=st.folds,
            seed=np.random.SeedSequence([st.seed, 11]))
    elif st.method == "weighted-true":
        propensity = PropensityEstimate.from_probabilities(
            st.propensity_values)
    elif st.method == "regression":
        regressions = fit_outcome_regressions(ds)

    main = error_rate_table(ds, gi, st.method, propensity=propensity,
                            regressions=regressions)
    marginals = marginal_error_rate_tables(ds, st.method,
                                           propensity=propensity,
                                           regressions=regressions)
    obs = main if st.method == "observational" else \
        error_rate_table(ds, gi, "observational")
    suites = {kind: suite_from_tables(main, marginals, obs, kind,
                                      st.normalization)
              for kind in st.kinds}

    specs = [MetricSpec(metric=metric, kind=kind, method=st.method,
                        normalization=st.normalization)
             for kind in st.kinds for metric in METRICS]
    refs = reference_distributions(
        ds, gi, specs, permutations=st.permutations, seed=st.seed,
        refit=st.refit, threads=st.threads, propensity=propensity,
        regressions=regressions)
    boots = bootstrap_distributions(
        ds, gi, specs, resamples=st.resamples, m=st.m, seed=st.seed,
        refit=st.refit, threads=st.threads, propensity=propensity,
        regressions=regressions)

    sections = {}
    for kind in st.kinds:
        values = suites[kind].values()
        u_map, se_map, ci_map, ref_map = {}, {}, {}, {}
        for metric in METRICS:
            spec = MetricSpec(metric=metric, kind=kind, method=st.method,
                              normalization=st.normalization)
            u_map[metric] = u_value(refs[spec], values[metric])
            boot = boots[spec]
            se_map[metric] = boot.se
            ci_map[metric] = {"t": ci_t_interval(boot, st.alpha),
                              "normal": ci_normal(boot, st.alpha),
                              "percentile": ci_percentile(boot, st.alpha)}
            ref_map[metric] = refs[spec].samples
        sections[kind] = KindSection(kind=kind, suite=suites[kind],
                                     u_values=u_map, standard_errors=se_map,
                                     intervals=ci_map,
                                     reference_samples=ref_map)

    any_spec = specs[0]
    diagnostics = {
        "reference_redraws": refs[any_spec].n_redrawn,
        "permutations": st.permutations,
        "bootstrap_redraws": boots[any_spec].n_redrawn,
        "resamples": st.resamples,
        "bootstrap_m": boots[any_spec].m,
        "undefined_fpr": main.n_undefined("fpr"),
        "undefined_fnr": main.n_undefined("fnr"),
        "regression_clipped": main.n_clipped,
    }
    if propensity is not None:
        w = propensity.untreated_weights()[np.asarray(ds.d) == 0]
        diagnostics.update({
            "propensity_method": propensity.method,
            "clamped_low": propensity.n_clamped_low,
            "clamped_high": propensity.n_clamped_high,
            "weight_min": float(w.min()) if w.size else float("nan"),
            "weight_max": float(w.max()) if w.size else float("nan"),
        })
    return AuditReport(version=__version__, config_lines=tuple(config_lines),
                       n=ds.n, method=st.method, alpha=st.alpha, table=main,
                       marginals=marginals, observational=obs,
                       sections=sections, diagnostics=diagnostics)


# -- formatting helpers -------------------------------------------------------

def _fmt(value) -> str:
    """Shortest-round-trip cell rendering; None becomes an empty field."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (np.floating, float)):
        return repr(float(value))
    if isinstance(value, (np.integer, int)):
        return str(int(value))
    return str(value)


def _f6(value) -> str:
    """Fixed-width rendering for the human-readable report."""
    if value is None:
        return "undefined"
    return "%.6f" % value


def write_delimited(path, header, rows, comment: Optional[str] = None):
    """Write one CSV table, optionally preceded by a provenance comment."""
    stream, close = (path, False) if isinstance(path, io.TextIOBase) \
        else (open(os.fspath(path), "w", newline=""), True)
    try:
        if comment:
            stream.write(comment + "\n")
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(list(header))
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    finally:
        if close:
            stream.close()


def read_delimited(path):
    """Read a CSV table back, skipping provenance comments.

    Returns (header, rows). Ragged rows or an empty file raise
    :class:`SchemaError` — these tables are machine-written, so any
    mismatch means the input is not what it claims to be.
    """
    stream, close = (path, False) if isinstance(path, io.TextIOBase) \
        else (open(os.fspath(path), "r", newline=""), True)
    try:
        rows = []
        header = None
        for row in csv.reader(stream):
            if not row or (row[0].startswith("#") and header is None):
                continue
            if header is None:
                header = [c.strip() for c in row]
                continue
            if len(row) != len(header):
                raise SchemaError("row width %d does not match header "
                                  "width %d in %s"
                                  % (len(row), len(header), path))
            rows.append(row)
        if header is None:
            raise SchemaError("no header row found in %s" % (path,))
        return header, rows
    except OSError as exc:
        raise SchemaError("cannot read table %s: %s" % (path, exc))
    finally:
        if close:
            stream.close()


def _expect_header(header, expected, path):
    if list(header) != list(expected):
        raise SchemaError("%s: expected columns %s, found %s"
                          % (path, ",".join(expected), ",".join(header)))


# -- audit writers ------------------------------------------------------------

GROUP_RATES_HEADER = ("group", "labels", "count", "untreated", "rate",
                      "estimate", "numerator", "denominator", "weight_min",
                      "weight_max")
METRICS_HEADER = ("kind", "metric", "estimate", "u_value", "se",
                  "t_lo", "t_hi", "normal_lo", "normal_hi",
                  "percentile_lo", "percentile_hi")
REFERENCE_HEADER = ("kind", "metric", "index", "value")


def _group_rate_rows(table: ErrorRateTable):
    for row in table.rows:
        for which in ("fpr", "fnr"):
            cell = getattr(row, which)
            yield ("/".join(str(c) for c in row.group),
                   "/".join(row.labels), row.count, row.untreated, which,
                   cell.value, cell.numerator, cell.denominator,
                   row.weight_min, row.weight_max)


def write_group_rates(report: AuditReport, path, comment=None):
    write_delimited(path, GROUP_RATES_HEADER,
                    _group_rate_rows(report.table), comment)


def write_metrics(report: AuditReport, path, comment=None):
    rows = []
    for kind, sec in report.sections.items():
        values = sec.suite.values()
        for metric in METRICS:
            cis = sec.intervals[metric]
            rows.append((kind, metric, values[metric],
                         sec.u_values[metric], sec.standard_errors[metric],
                         cis["t"].lo, cis["t"].hi,
                         cis["normal"].lo, cis["normal"].hi,
                         cis["percentile"].lo, cis["percentile"].hi))
    write_delimited(path, METRICS_HEADER, rows, comment)


def write_reference_samples(report: AuditReport, path, comment=None):
    rows = []
    for kind, sec in report.sections.items():
        for metric in METRICS:
            for i, v in enumerate(sec.reference_samples[metric]):
                rows.append((kind, metric, i, v))
    write_delimited(path, REFERENCE_HEADER, rows, comment)


def _rate_table_lines(table: ErrorRateTable, heading: str, out: list,
                      pos_name: str = "fpr", neg_name: str = "fnr"):
    out.append("## " + heading)
    out.append("group | labels | count | untreated | %s | %s"
               % (pos_name, neg_name))
    for row in table.rows:
        line = "%s | %s | %d | %d | %s | %s" % (
            "/".join(str(c) for c in row.group), "/".join(row.labels),
            row.count, row.untreated, _f6(row.fpr.value), _f6(row.fnr.value))
        if row.weight_min is not None:
            line += " | weights %.3f..%.3f" % (row.weight_min, row.weight_max)
        out.append(line)
    out.append("")


def render_report_text(report: AuditReport) -> str:
    """The hierarchical human-readable audit report."""
    out = ["# counterfactual fairness audit",
           "version: %s" % report.version, ""]
    out.append("## configuration")
    out.extend(report.config_lines if report.config_lines
               else ("(none recorded)",))
    out.append("")
    out.append("## data")
    out.append("records: %d" % report.n)
    out.append("estimation method: %s" % report.method)
    out.append("")
    kind_of = {"counterfactual-weighted": "counterfactual error rates",
               "counterfactual-regression": "counterfactual error rates",
               "observational": "observational error rates"}
    _rate_table_lines(report.table,
                      "%s (%s)" % (kind_of.get(report.table.kind,
                                               report.table.kind),
                                   report.method),
                      out, "cFPR", "cFNR")
    if report.table.kind != "observational":
        _rate_table_lines(report.observational,
                          "observational error rates", out, "FPR", "FNR")
    for j, marginal in enumerate(report.marginals):
        _rate_table_lines(marginal,
                          "marginal rates, characteristic %d" % (j + 1),
                          out, "cFPR", "cFNR")
    level = 100 * (1 - report.alpha)
    for kind, sec in report.sections.items():
        out.append("## disparity metrics — %s (%s differences)"
                   % (kind, _RATE_NAMES[kind]))
        out.append("metric | estimate | u-value | se | t %g%% | normal %g%% "
                   "| percentile %g%%" % (level, level, level))
        values = sec.suite.values()
        for metric in METRICS:
            cis = sec.intervals[metric]
            out.append("%s | %s | %.4f | %s | [%s, %s] | [%s, %s] | [%s, %s]"
                       % (metric, _f6(values[metric]),
                          sec.u_values[metric],
                          _f6(sec.standard_errors[metric]),
                          _f6(cis["t"].lo), _f6(cis["t"].hi),
                          _f6(cis["normal"].lo), _f6(cis["normal"].hi),
                          _f6(cis["percentile"].lo),
                          _f6(cis["percentile"].hi)))
        out.append("max pair: %s; pairs used: %d; excluded: %d%s"
                   % (" vs ".join("/".join(str(c) for c in g)
                                  for g in sec.suite.max_pair)
                      if sec.suite.max_pair else "(none)",
                      sec.suite.n_pairs, sec.suite.n_excluded,
                      " (partial)" if sec.suite.partial else ""))
        out.append("")
    out.append("## diagnostics")
    for key in sorted(report.diagnostics):
        out.append("%s: %s" % (key, _fmt(report.diagnostics[key])))
    out.append("")
    return "\n".join(out)


def write_report_text(report: AuditReport, path):
    with open(os.fspath(path), "w", encoding="utf-8") as fh:
        fh.write(render_report_text(report))


# -- replication-grid writers -------------------------------------------------

REPLICATES_HEADER = ("scenario", "n", "method", "replicate", "kind",
                     "metric", "value", "redrawn")
SUMMARY_HEADER = ("scenario", "n", "method", "kind", "metric", "mean",
                  "q025", "q975", "truth", "flagged")
RATES_HEADER = ("scenario", "group", "rate", "mean", "q025", "q975",
                "truth", "defined")
COVERAGE_REPLICATES_HEADER = ("scenario", "n", "replicate", "estimate",
                              "se", "interval_method", "lo", "hi", "redrawn")
COVERAGE_SUMMARY_HEADER = ("scenario", "n", "interval_method", "coverage",
                           "avg_length", "avg_length_truncated")
SWEEP_HEADER = ("z", "vary", "kind", "metric", "value")
TRUTH_SIDECAR_HEADER = ("y0", "y1", "pi_true")


def write_grid(grid, out_dir, comment=None):
    """Per-replicate, summary, and group-rate tables for one grid."""
    rep_rows = []
    for cell in grid.cells:
        for kind in KINDS:
            for metric, value in cell.suites[kind].values().items():
                rep_rows.append((cell.scenario, cell.n, cell.method,
                                 cell.replicate, kind, metric, value,
                                 cell.redrawn))
    write_delimited(os.path.join(out_dir, "replicates.csv"),
                    REPLICATES_HEADER, rep_rows, comment)
    sum_rows = [(r["scenario"], r["n"], r["method"], r["kind"], r["metric"],
                 r["mean"], r["q025"], r["q975"], r["truth"], r["flagged"])
                for r in grid.summary_rows()]
    write_delimited(os.path.join(out_dir, "summary.csv"), SUMMARY_HEADER,
                    sum_rows, comment)


def write_grid_rates(grid, method, n, out_dir, comment=None):
    rows = [(r["scenario"], r["group"], r["rate"], r["mean"], r["q025"],
             r["q975"], r["truth"], r["defined"])
            for r in grid.rate_rows(method, n)]
    write_delimited(os.path.join(out_dir, "rates.csv"), RATES_HEADER, rows,
                    comment)


def write_coverage(study, out_dir, comment=None):
    rep_rows = []
    for r in study.rows:
        for name in ("t", "normal", "percentile"):
            iv = r.intervals[name]
            rep_rows.append((r.scenario, r.n, r.replicate, r.estimate, r.se,
                             name, iv.lo, iv.hi, r.redrawn))
    write_delimited(os.path.join(out_dir, "coverage_replicates.csv"),
                    COVERAGE_REPLICATES_HEADER, rep_rows, comment)
    sum_rows = [(r["scenario"], r["n"], r["interval_method"], r["coverage"],
                 r["avg_length"], r["avg_length_truncated"])
                for r in study.summary_rows()]
    write_delimited(os.path.join(out_dir, "coverage_summary.csv"),
                    COVERAGE_SUMMARY_HEADER, sum_rows, comment)


def write_sweep_truth(points, path, comment=None):
    """Flat metric-vs-strength table for a demonstration sweep."""
    rows = []
    for p in points:
        for kind in KINDS:
            for metric, value in p.truth.suite(kind).values().items():
                rows.append((p.z, p.vary, kind, metric, value))
    write_delimited(path, SWEEP_HEADER, rows, comment)


def write_truth_sidecar(data, path):
    """Hidden-truth columns aligned row-by-row with the data file."""
    rows = zip(data.y0.tolist(), data.y1.tolist(), data.pi_true.tolist())
    write_delimited(path, TRUTH_SIDECAR_HEADER, rows)


# -- plot-table reshaping (report command) ------------------------------------

SWEEP_PLOT_HEADER = ("panel", "z", "kind", "metric", "value")
RATES_PLOT_HEADER = ("scenario", "group", "rate", "mean", "q025", "q975",
                    "truth")
COVERAGE_PLOT_HEADER = ("scenario", "n", "interval_method", "coverage",
                       "avg_length", "avg_length_truncated")


def reshape_sweep(labeled_inputs, out_path, comment=None):
    """Merge sweep-truth tables into one panel-labeled plot table."""
    rows = []
    for panel, path in labeled_inputs:
        header, data = read_delimited(path)
        _expect_header(header, SWEEP_HEADER, path)
        for row in data:
            rows.append((panel,) + tuple(v for i, v in enumerate(row)
                                         if i != 1))
    write_delimited(out_path, SWEEP_PLOT_HEADER, rows, comment)


def reshape_rates(in_path, out_path, comment=None):
    """Group-rate dot-and-interval table (drops the bookkeeping column)."""
    header, data = read_delimited(in_path)
    _expect_header(header, RATES_HEADER, in_path)
    rows = [tuple(row[:7]) for row in data]
    write_delimited(out_path, RATES_PLOT_HEADER, rows, comment)


def reshape_coverage(in_path, out_path, comment=None):
    """Coverage/length curves keyed by size and interval style."""
    header, data = read_delimited(in_path)
    _expect_header(header, COVERAGE_SUMMARY_HEADER, in_path)
    write_delimited(out_path, COVERAGE_PLOT_HEADER,
                    [tuple(row) for row in data], comment)
