"""Exception hierarchy.

Data problems and numerical problems are kept apart so that the command line
can map them to distinct exit codes.
"""


class StggmError(Exception):
    """Base class for all package errors."""


class DataError(StggmError):
    """Malformed or inconsistent input data."""


class GridError(DataError):
    """A DatasetGrid failed validation."""


class ConfigError(DataError):
    """Invalid configuration or hyperparameter value."""


class NumericalError(StggmError):
    """A numerical routine could not produce a valid result."""


class CholeskyFailure(NumericalError):
    """Gram-plus-shrinkage matrix is not numerically positive definite."""


class DegenerateResidual(NumericalError):
    """Residual sum of squares is zero, the inverse-gamma draw is undefined."""


class NonConvergence(NumericalError):
    """Iterative refit did not meet its tolerance within the iteration cap."""


class SingularCovariance(NumericalError):
    """Sample covariance too degenerate for a constrained refit."""


class InfeasiblePerturbation(StggmError):
    """Not enough non-edges to add back the removed edges."""


class GuardExceeded(StggmError):
    """Problem too large for exact enumeration."""


class GridTooLarge(GuardExceeded):
    """MRF grid has too many present cells for exact normalization."""
