"""Exception hierarchy shared across the package.

The command line layer maps these onto process exit codes, so new
exception types should subclass one of the three top branches below
(config, data, infeasibility) rather than :class:`CfauditError` directly.
"""


class CfauditError(Exception):
    """Base class for all errors raised by cfaudit."""


class ConfigError(CfauditError):
    """Invalid configuration, unusable option value, or missing dependency."""


class DataError(CfauditError):
    """Input data could not be ingested or fails schema requirements."""


class SchemaError(DataError):
    """A declared column is missing or the header is unusable."""


class RowParseError(DataError):
    """A data row contains a token that cannot be interpreted."""


class EmptyInputError(DataError):
    """No usable rows survived ingestion."""


class DomainError(CfauditError, ValueError):
    """A scalar argument lies outside its mathematical domain."""


class InfeasibilityError(CfauditError):
    """The requested analysis is not feasible on the data at hand."""


class SingularDesignError(InfeasibilityError):
    """Model design matrix is rank deficient.

    Carries the names of the offending columns in ``columns`` when they
    could be identified.
    """

    def __init__(self, message: str, columns: tuple = ()):
        super().__init__(message)
        self.columns = tuple(columns)


class PositivityViolationError(InfeasibilityError):
    """A fit requires records (e.g. untreated rows) that do not exist."""


class CrossFitDegeneracyError(InfeasibilityError):
    """Cross-fitting folds could not be arranged to contain both treatment arms."""


class MetricInfeasibleError(InfeasibilityError):
    """Fewer than two groups have a defined rate, so no disparity exists."""


class AuditInfeasibleError(InfeasibilityError):
    """Every group rate in a table is undefined."""


class ResamplingExhaustedError(InfeasibilityError):
    """Feasible resamples could not be drawn within the retry budget."""
