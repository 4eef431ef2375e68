"""Exception types shared across the package."""


class IblabError(Exception):
    """Base class for all package-specific errors."""


class InvalidParameterError(IblabError, ValueError):
    """A scalar or structural argument is outside its admissible range."""


class InvalidConfigurationError(IblabError, ValueError):
    """Mutually inconsistent options (e.g. encoding vs. loss formulation)."""


class InvalidDatasetError(IblabError, ValueError):
    """A dataset violates a structural requirement (e.g. a missing class)."""


class DomainError(IblabError, ValueError):
    """An evaluation point lies outside the domain of a map."""


class LossOverflowError(IblabError, OverflowError):
    """The total loss overflowed; carries the first offending index."""

    def __init__(self, message: str, index: int):
        super().__init__(message)
        self.index = index


class SingularGramError(IblabError, ValueError):
    """Gram matrix is singular or too ill-conditioned to invert reliably."""


class SolverFailureError(IblabError, RuntimeError):
    """An iterative solver stagnated or failed to bracket a root."""


class DomainViolationError(IblabError, RuntimeError):
    """A solver produced iterates outside the admissible dual range."""


class NotApplicableError(IblabError, RuntimeError):
    """A closed-form candidate's validity condition fails; names the witness."""

    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


class DegenerateDataError(IblabError, ValueError):
    """A construction that needs a nonzero direction received only zeros."""


class TrainingOverflowError(IblabError, OverflowError):
    """Gradient descent produced non-finite iterates."""


class NormalizationViolationError(IblabError, ValueError):
    """Requested scale would break the unit row-norm convention."""
