"""Command-line front end: audit, simulate, replicate, report.

Every command takes ``--config PATH`` (a flat key = value file, schema
in the README) plus optional overrides: ``--seed``, ``--out``,
``--threads``, ``--paper-literal-normalization`` (switches the
disparity normalization to the group-denominator convention), and
``--no-refit`` (freeze nuisance models during resampling). Outputs are
deterministic in config + seed. Exit codes: 0 success, 2 configuration
error, 3 data error, 4 infeasibility; failures also emit one JSON
record on stderr so wrappers can parse them.
"""

import argparse
import dataclasses
import json
import math
import os
import sys

import numpy as np

from . import report as rpt
from . import simulation as sim
from .config import ConfigMap, read_config
from .data import ColumnSpec, enumerate_groups, load_dataset, write_dataset
from .errors import (CfauditError, ConfigError, DataError, DomainError,
                     InfeasibilityError)
from .estimators import METHODS
from .metrics import KINDS

_EXIT_CONFIG, _EXIT_DATA, _EXIT_INFEASIBLE = 2, 3, 4

# rough per-replicate cost in seconds at n=1000, used only for the
# resource-guard runtime estimate
_METHOD_COST = {"observational": 0.002, "weighted-true": 0.004,
                "regression": 0.03, "weighted-glm": 0.25,
                "weighted-ensemble": 8.0}

_HINTS = {
    "AuditInfeasibleError": "merge sparse protected levels or audit a "
                            "coarser set of characteristics",
    "MetricInfeasibleError": "merge sparse protected levels so at least "
                             "two groups have defined rates",
    "PositivityViolationError": "some stratum has no untreated records; "
                                "pool levels or collect more untreated data",
    "CrossFitDegeneracyError": "reduce folds so every fold keeps both "
                               "treatment arms",
    "ResamplingExhaustedError": "increase the sample size or audit fewer "
                                "groups",
}


def _universal_keys(cfg: ConfigMap):
    """Keys every command resolves so the flag overrides always land.

    Returns (seed, out, threads, normalization, refit); the last two are
    inert for commands that do not estimate anything.
    """
    seed = cfg.get_int("seed", 0)
    out = cfg.get_str("out", ".")
    threads = cfg.get_int("threads", 1, minimum=1)
    normalization = cfg.get_normalization()
    refit = cfg.get_bool("refit", True)
    return seed, out, threads, normalization, refit


def _ensure_out(out: str) -> str:
    os.makedirs(out, exist_ok=True)
    return out


def _write_resolved(cfg: ConfigMap, out: str) -> None:
    with open(os.path.join(out, "resolved.cfg"), "w",
              encoding="utf-8") as fh:
        fh.write(cfg.resolved_text())


# -- audit ---------------------------------------------------------------

def _load_propensity_column(path: str, spec: ColumnSpec,
                            column: str) -> np.ndarray:
    """Read one probability column, mirroring ingestion's row acceptance.

    Rows that ingestion rejects (an empty value in any declared column)
    are skipped here too, so the result aligns record-for-record with
    the loaded dataset.
    """
    import csv
    from .errors import RowParseError, SchemaError
    declared = (list(spec.protected_columns)
                + [spec.treatment_column, spec.outcome_column]
                + list(spec.covariate_columns) + [spec.score_column])
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if column not in header:
            raise SchemaError("propensity_column %r not found in header"
                              % (column,))
        needed = [header.index(c) for c in declared]
        pos = header.index(column)
        values = []
        for rownum, row in enumerate(reader, start=2):
            cells = [row[i].strip() if i < len(row) else "" for i in needed]
            if any(c == "" for c in cells):
                continue
            tok = row[pos].strip() if pos < len(row) else ""
            try:
                v = float(tok)
            except ValueError:
                raise RowParseError("row %d: propensity token %r is not a "
                                    "number" % (rownum, tok))
            if not 0.0 <= v <= 1.0:
                raise DomainError("row %d: propensity %g outside [0, 1]"
                                  % (rownum, v))
            values.append(v)
    return np.asarray(values, dtype=float)


def cmd_audit(cfg: ConfigMap) -> None:
    seed, out, threads, normalization, refit = _universal_keys(cfg)
    data_path = cfg.get_str("data")
    spec = ColumnSpec(
        protected_columns=cfg.get_list("protected_columns"),
        treatment_column=cfg.get_str("treatment_column", "d"),
        outcome_column=cfg.get_str("outcome_column", "y"),
        covariate_columns=cfg.get_list("covariate_columns", ()),
        score_column=cfg.get_str("score_column", "s"),
        score_threshold=cfg.get_float("score_threshold", 0.5, lo=0.0, hi=1.0))
    method = cfg.get_str("method", "weighted-glm", choices=METHODS)
    kinds = cfg.get_list("kinds", KINDS, choices=KINDS)
    permutations = cfg.get_int("permutations", 1000, minimum=1)
    resamples = cfg.get_int("resamples", 1000, minimum=2)
    alpha = cfg.get_float("alpha", 0.1, lo=0.0, hi=1.0)
    m_rule = cfg.get_optional_str("m")
    folds = cfg.get_int("folds", 10, minimum=2)
    prop_col = cfg.get_optional_str("propensity_column")
    cfg.finish()

    try:
        with open(data_path, "r", newline="") as fh:
            ds = load_dataset(fh, spec)
    except OSError as exc:
        raise DataError("cannot read data file %s: %s" % (data_path, exc))
    prop_values = None
    if prop_col is not None:
        prop_values = _load_propensity_column(data_path, spec, prop_col)
        if len(prop_values) != ds.n:
            raise DataError("propensity column has %d usable values but the "
                            "dataset has %d records"
                            % (len(prop_values), ds.n))
    gi = enumerate_groups(ds)
    settings = rpt.AuditSettings(
        method=method, kinds=kinds, normalization=normalization,
        permutations=permutations, resamples=resamples, alpha=alpha,
        m=m_rule, refit=refit, seed=seed, threads=threads, folds=folds,
        propensity_values=prop_values)
    config_lines = cfg.resolved_text().splitlines()
    audit = rpt.run_audit(ds, gi, settings, config_lines=config_lines)

    out = _ensure_out(out)
    comment = cfg.resolved_comment()
    rpt.write_report_text(audit, os.path.join(out, "report.txt"))
    rpt.write_metrics(audit, os.path.join(out, "metrics.csv"), comment)
    rpt.write_group_rates(audit, os.path.join(out, "group_rates.csv"),
                          comment)
    rpt.write_reference_samples(
        audit, os.path.join(out, "reference_samples.csv"), comment)
    _write_resolved(cfg, out)


# -- simulate ---------------------------------------------------------------

_SCENARIO_RATE_KEYS = ("need_majority", "need_mid", "need_minority",
                       "opportunity_majority", "opportunity_mid",
                       "opportunity_minority", "z_m1", "z_m2", "z_minority",
                       "y1_majority")


def _scenario_config_from(cfg: ConfigMap) -> "sim.ScenarioConfig":
    """Resolve a scenario id plus optional parameter overrides.

    Every generating parameter lands in the resolved config, so a run's
    provenance lists the full data-generating recipe even when the file
    only named the scenario.
    """
    base = sim.scenario_config(cfg.get_int("scenario", minimum=1))
    fields = {name: cfg.get_float(name, getattr(base, name))
              for name in _SCENARIO_RATE_KEYS}
    fields["predictors"] = cfg.get_str("predictors", base.predictors,
                                       choices=sim.PREDICTOR_SETS)
    fields["group_probabilities"] = cfg.get_floats(
        "group_probabilities", base.group_probabilities)
    return dataclasses.replace(base, **fields)


def _demo_config_from(cfg: ConfigMap) -> "sim.DemoConfig":
    shares_name = cfg.get_str("shares", "default",
                              choices=("default", "spread"))
    shares = sim.DEFAULT_DEMO_SHARES if shares_name == "default" \
        else sim.SPREAD_DEMO_SHARES
    return sim.demo_config(
        z_minority=cfg.get_float("z_minority", 0.2),
        z_m1=cfg.get_float("z_m1", 0.2),
        z_m2=cfg.get_float("z_m2", 0.2),
        z_majority=cfg.get_float("z_majority", 0.2),
        shares=shares,
        fpr_obs=cfg.get_float("fpr_obs", 0.1),
        fnr_obs=cfg.get_float("fnr_obs", 0.2))


def cmd_simulate(cfg: ConfigMap) -> None:
    seed, out, threads, normalization, _refit = _universal_keys(cfg)
    generator = cfg.get_str("generator",
                            choices=("scenario", "demo", "demo-sweep"))
    if generator == "scenario":
        scfg = _scenario_config_from(cfg)
        scenario = scfg.scenario
        n = cfg.get_int("n", minimum=1)
        role = cfg.get_str("role", "estimation", choices=sim.ROLES)
        n_train = cfg.get_int("n_train", 1000, minimum=1)
        cfg.finish()
        if role == "train":
            data = sim.generate_scenario_data(scfg, "train", n,
                                              seed=[seed, 51, scenario])
        elif role == "validation":
            data = sim.generate_scenario_data(scfg, "validation", n,
                                              seed=[seed, 53, scenario])
        else:
            train = sim.generate_scenario_data(scfg, "train", n_train,
                                               seed=[seed, 51, scenario])
            model = sim.train_risk_model(
                train, scfg, seed=np.random.SeedSequence([seed, 52, scenario]))
            data = sim.generate_scenario_data(scfg, "estimation", n,
                                              seed=[seed, 54, scenario,
                                                    0, 0, 0],
                                              risk_model=model)
        out = _ensure_out(out)
        write_dataset(data.dataset, os.path.join(out, "data.csv"))
        rpt.write_truth_sidecar(data, os.path.join(out, "truth.csv"))
        _write_resolved(cfg, out)
    elif generator == "demo":
        n = cfg.get_int("n", minimum=1)
        demo = _demo_config_from(cfg)
        cfg.finish()
        data = sim.generate_demo_data(demo, n, seed=[seed, 41, 0])
        out = _ensure_out(out)
        write_dataset(data.dataset, os.path.join(out, "data.csv"))
        rpt.write_truth_sidecar(data, os.path.join(out, "truth.csv"))
        _write_resolved(cfg, out)
    else:
        z_values = cfg.get_floats("z_values")
        vary = cfg.get_str("vary", "minority", choices=("minority", "mid"))
        n = cfg.get_int("n", 50000, minimum=1)
        shares_name = cfg.get_str("shares", "default",
                                  choices=("default", "spread"))
        cfg.finish()
        if not z_values:
            raise ConfigError("z_values must name at least one strength")
        shares = sim.DEFAULT_DEMO_SHARES if shares_name == "default" \
            else sim.SPREAD_DEMO_SHARES
        out = _ensure_out(out)
        comment = cfg.resolved_comment()
        points = sim.demo_sweep(z_values, n=n, seed=seed, vary=vary,
                                shares=shares, normalization=normalization)
        for i, z in enumerate(z_values):
            if vary == "minority":
                demo = sim.demo_config(z_minority=z, shares=shares)
            else:
                demo = sim.demo_config(z_minority=0.8, z_m1=z, z_m2=z,
                                       shares=shares)
            data = sim.generate_demo_data(demo, n, seed=[seed, 41, i])
            tag = repr(float(z))
            write_dataset(data.dataset,
                          os.path.join(out, "data_z%s.csv" % tag))
            rpt.write_truth_sidecar(
                data, os.path.join(out, "truth_z%s.csv" % tag))
        rpt.write_sweep_truth(points, os.path.join(out, "sweep_truth.csv"),
                              comment)
        _write_resolved(cfg, out)


# -- replicate ---------------------------------------------------------------

def _grid_seconds(scenarios, sizes, methods, replicates) -> float:
    per_rep = sum((n / 1000.0) * _METHOD_COST[m]
                  for n in sizes for m in methods)
    setup = 15.0 * len(scenarios)      # train + validate + truth
    return len(scenarios) * replicates * per_rep + setup


def _coverage_seconds(sizes, replicates, resamples, refit) -> float:
    total = 0.0
    for n in sizes:
        m = math.ceil(n ** 0.75)
        per_resample = (m / 1000.0) * (_METHOD_COST["weighted-glm"]
                                       if refit else 0.004)
        total += replicates * resamples * per_resample
    return total + 15.0


def _guard(tasks: int, cap: int, seconds: float) -> None:
    if tasks > cap:
        minutes = seconds / 60.0
        raise ConfigError(
            "replication grid spans %d tasks, above the max_tasks cap of %d "
            "(estimated runtime roughly %.0f minutes); raise max_tasks to "
            "proceed" % (tasks, cap, minutes))


def cmd_replicate(cfg: ConfigMap) -> None:
    seed, out, threads, normalization, refit = _universal_keys(cfg)
    task = cfg.get_str("task", "grid", choices=("grid", "coverage"))
    if task == "grid":
        scenarios = cfg.get_ints("scenarios", (1, 2, 3))
        sizes = cfg.get_ints("sizes", (1000, 5000, 7000, 9000), minimum=1)
        methods = cfg.get_list(
            "methods",
            ("regression", "weighted-glm", "weighted-ensemble",
             "weighted-true"), choices=METHODS)
        replicates = cfg.get_int("replicates", 200, minimum=1)
        n_train = cfg.get_int("n_train", 1000, minimum=1)
        n_validation = cfg.get_int("n_validation", 50000, minimum=1)
        rates_method = cfg.get_str("rates_method", "weighted-glm",
                                   choices=METHODS)
        rates_n = cfg.get_int("rates_n", max(sizes), minimum=1)
        cap = cfg.get_int("max_tasks", 20000, minimum=1)
        cfg.finish()
        if rates_method not in methods or rates_n not in sizes:
            raise ConfigError("rates_method/rates_n must name a grid cell: "
                              "got %s at n=%d" % (rates_method, rates_n))
        tasks = len(scenarios) * len(sizes) * len(methods) * replicates
        _guard(tasks, cap, _grid_seconds(scenarios, sizes, methods,
                                         replicates))
        grid = sim.replicate(scenarios, sizes, methods, replicates,
                             seed=seed, n_train=n_train,
                             n_validation=n_validation,
                             normalization=normalization, threads=threads)
        out = _ensure_out(out)
        comment = cfg.resolved_comment()
        rpt.write_grid(grid, out, comment)
        rpt.write_grid_rates(grid, rates_method, rates_n, out, comment)
        _write_resolved(cfg, out)
    else:
        scenario = cfg.get_int("scenario", 1, minimum=1)
        sizes = cfg.get_ints("sizes", (1000,), minimum=1)
        replicates = cfg.get_int("replicates", 200, minimum=1)
        resamples = cfg.get_int("resamples", 500, minimum=2)
        alpha = cfg.get_float("alpha", 0.1, lo=0.0, hi=1.0)
        metric = cfg.get_str("metric", "avg",
                             choices=("avg", "max", "var", "marg", "obs"))
        kind = cfg.get_str("kind", "negative", choices=KINDS)
        method = cfg.get_str("method", "weighted-glm", choices=METHODS)
        m_rule = cfg.get_optional_str("m")
        n_train = cfg.get_int("n_train", 1000, minimum=1)
        n_validation = cfg.get_int("n_validation", 50000, minimum=1)
        cap = cfg.get_int("max_tasks", 20000, minimum=1)
        cfg.finish()
        tasks = len(sizes) * replicates
        _guard(tasks, cap, _coverage_seconds(sizes, replicates, resamples,
                                             refit))
        study = sim.coverage_study(
            scenario, sizes, replicates, resamples=resamples, alpha=alpha,
            metric=metric, kind=kind, method=method,
            normalization=normalization, m=m_rule, refit=refit, seed=seed,
            n_train=n_train, n_validation=n_validation, threads=threads)
        out = _ensure_out(out)
        comment = cfg.resolved_comment()
        rpt.write_coverage(study, out, comment)
        _write_resolved(cfg, out)


# -- report -------------------------------------------------------------------

def cmd_report(cfg: ConfigMap) -> None:
    _seed, out, _threads, _normalization, _refit = _universal_keys(cfg)
    figure = cfg.get_str("figure", choices=("sweep", "rates", "coverage"))
    inputs = cfg.get_list("inputs")
    if not inputs:
        raise ConfigError("inputs must name at least one table")
    panels = None
    if figure == "sweep":
        panels = cfg.get_list("panels", tuple("custom" for _ in inputs))
        if len(panels) != len(inputs):
            raise ConfigError("panels must label each input once: %d labels "
                              "for %d inputs" % (len(panels), len(inputs)))
    else:
        if len(inputs) != 1:
            raise ConfigError("figure %r takes exactly one input table"
                              % (figure,))
    cfg.finish()
    out = _ensure_out(out)
    comment = cfg.resolved_comment()
    if figure == "sweep":
        rpt.reshape_sweep(list(zip(panels, inputs)),
                          os.path.join(out, "sweep_metrics.csv"), comment)
    elif figure == "rates":
        rpt.reshape_rates(inputs[0], os.path.join(out, "rate_intervals.csv"), comment)
    else:
        rpt.reshape_coverage(inputs[0], os.path.join(out, "interval_coverage.csv"),
                             comment)
    _write_resolved(cfg, out)


# -- wiring --------------------------------------------------------------

_COMMANDS = {"audit": cmd_audit, "simulate": cmd_simulate,
             "replicate": cmd_replicate, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfaudit",
        description="Counterfactual fairness auditing for treatment-guiding "
                    "risk scores.")
    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "audit": "estimate disparity metrics with u-values and intervals",
        "simulate": "generate benchmark data with hidden-truth sidecars",
        "replicate": "run a replication grid or interval-coverage study",
        "report": "reshape outputs into flat plot-data tables",
    }
    for name, desc in descriptions.items():
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", required=True,
                       help="path to a key = value configuration file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", default=None,
                       help="override the output directory")
        p.add_argument("--threads", type=int, default=None,
                       help="parallel workers for resampling loops")
        p.add_argument("--paper-literal-normalization", action="store_true",
                       help="normalize averaged disparities by the group "
                            "count instead of the pair count")
        p.add_argument("--no-refit", action="store_true",
                       help="freeze nuisance models during resampling")
    return parser


def _emit_error(exc: CfauditError, code: int) -> None:
    record = {"error": type(exc).__name__, "exit_code": code,
              "message": str(exc)}
    hint = _HINTS.get(type(exc).__name__)
    if hint:
        record["hint"] = hint
    sys.stderr.write(json.dumps(record, sort_keys=True) + "\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        pairs = read_config(args.config)
        cfg = ConfigMap(pairs, args.command)
        if args.seed is not None:
            cfg.override("seed", args.seed)
        if args.out is not None:
            cfg.override("out", args.out)
        if args.threads is not None:
            cfg.override("threads", args.threads)
        if args.paper_literal_normalization:
            cfg.override("normalization", "group-denominator")
        if args.no_refit:
            cfg.override("refit", False)
        _COMMANDS[args.command](cfg)
        return 0
    except (ConfigError, DomainError) as exc:
        _emit_error(exc, _EXIT_CONFIG)
        return _EXIT_CONFIG
    except DataError as exc:
        _emit_error(exc, _EXIT_DATA)
        return _EXIT_DATA
    except InfeasibilityError as exc:
        _emit_error(exc, _EXIT_INFEASIBLE)
        return _EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
