"""Counterfactual fairness auditing for treatment-guiding risk scores.

The package estimates group error rates of a binary screening score
against the *untreated* potential outcome and summarizes their
disparities, with permutation u-values and rescaled-bootstrap intervals
for uncertainty.  The usual entry points:

>>> from cfaudit import load_dataset, enumerate_groups, ColumnSpec
>>> from cfaudit import error_rate_table, metric_suite

or, end to end, the ``cfaudit`` command line (see ``cli.py``).
"""

__version__ = "0.1.0"

from .errors import (CfauditError, ConfigError, DataError, DomainError,
                     InfeasibilityError, ResamplingExhaustedError)
from .data import (ColumnSpec, Dataset, GroupIndex, binarize_score,
                   dataset_from_arrays, default_spec, enumerate_groups,
                   group_codes, load_dataset, write_dataset)
from .estimators import METHODS, WEIGHTED_METHODS, ErrorRateTable, \
    error_rate_table, marginal_error_rate_tables, weighted_rate_cells
from .metrics import (KINDS, NORMALIZATIONS, MetricSuite, delta_avg,
                      delta_marg, delta_max, delta_obs, delta_var,
                      metric_suite, pairwise_differences, suite_from_tables)
from .inference import (METRICS, BootstrapResult, ConfidenceInterval,
                        MetricSpec, ReferenceDistribution, ci_normal,
                        ci_percentile, ci_t_interval, evaluate_metric,
                        m_from_rule, permutation_reference,
                        reference_distributions, rescaled_bootstrap,
                        rescaled_bootstrap_statistic, u_value)
from .report import AuditReport, AuditSettings, render_report_text, run_audit
from .config import (ConfigMap, bundled_config_path, list_bundled_configs,
                     parse_config_text, read_config)
from . import simulation

__all__ = [
    "CfauditError", "ConfigError", "DataError", "DomainError",
    "InfeasibilityError", "ResamplingExhaustedError",
    "ColumnSpec", "Dataset", "GroupIndex", "binarize_score",
    "dataset_from_arrays", "default_spec", "enumerate_groups",
    "group_codes", "load_dataset", "write_dataset",
    "METHODS", "WEIGHTED_METHODS", "ErrorRateTable", "error_rate_table",
    "marginal_error_rate_tables", "weighted_rate_cells",
    "KINDS", "NORMALIZATIONS", "MetricSuite", "delta_avg", "delta_marg",
    "delta_max", "delta_obs", "delta_var", "metric_suite",
    "pairwise_differences", "suite_from_tables",
    "METRICS", "BootstrapResult", "ConfidenceInterval", "MetricSpec",
    "ReferenceDistribution", "ci_normal", "ci_percentile", "ci_t_interval",
    "evaluate_metric", "m_from_rule", "permutation_reference",
    "reference_distributions", "rescaled_bootstrap",
    "rescaled_bootstrap_statistic", "u_value",
    "AuditReport", "AuditSettings", "render_report_text", "run_audit",
    "ConfigMap", "bundled_config_path", "list_bundled_configs",
    "parse_config_text", "read_config",
    "simulation",
]
