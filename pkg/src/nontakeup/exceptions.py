"""Exception hierarchy shared by all pipeline stages."""

from __future__ import annotations


class NonTakeUpError(Exception):
    """Base class for errors raised by this package."""

    #: short machine-readable code used by the command line front end
    code = "error"


class ConfigurationError(NonTakeUpError):
    """Invalid or incomplete configuration (policy years, filters, options)."""

    code = "configuration"


class InputValidationError(NonTakeUpError, ValueError):
    """Input data violate a documented invariant."""

    code = "validation"


class CompositionError(InputValidationError):
    """Household roster does not form a valid community of needs."""

    code = "composition"


class DomainError(NonTakeUpError, ValueError):
    """A numerical argument is outside the domain of a function."""

    code = "domain"


class SchemaError(InputValidationError):
    """A delimited input file does not match its documented schema."""

    code = "schema"


class MissingArtifactError(NonTakeUpError, FileNotFoundError):
    """An upstream pipeline artifact is missing."""

    code = "missing-artifact"


class SingularDesignError(NonTakeUpError, ValueError):
    """Design matrix is rank deficient.

    Parameters
    ----------
    columns : list of str
        Columns that are linear combinations of preceding columns.
    """

    code = "singular-design"

    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(
            "design matrix is rank deficient; collinear columns: "
            + ", ".join(self.columns)
        )


class ConvergenceError(NonTakeUpError, RuntimeError):
    """Optimizer failed to converge.

    The ``trajectory`` attribute holds one ``(iteration, loglik, grad_norm)``
    tuple per iteration so the failure can be diagnosed after the fact.
    """

    code = "non-convergence"

    def __init__(self, message, trajectory=()):
        self.trajectory = list(trajectory)
        super().__init__(message)


class UndefinedRateError(NonTakeUpError, ZeroDivisionError):
    """A rate has zero mass in its denominator."""

    code = "undefined-rate"
