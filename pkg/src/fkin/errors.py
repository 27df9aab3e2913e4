"""Exception types shared across the package."""


class FkinError(Exception):
    """Base class for package-specific failures."""


class DomainError(FkinError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NonConvergence(FkinError, ArithmeticError):
    """A series or iteration failed to converge within its configured budget."""


class ResourceError(FkinError):
    """A combinatorial or memory bound would be exceeded."""


class OracleFailure(FkinError):
    """An independent numerical check disagrees with itself beyond tolerance."""


class SingularStep(FkinError, ArithmeticError):
    """A time-stepping update produced a vanishing diagonal coefficient."""


class ConfigError(FkinError, ValueError):
    """A run configuration file is malformed or inconsistent."""


class SolverError(FkinError):
    """A solver failed for reasons other than bad input."""


class NotSupported(FkinError):
    """The requested evaluation path is not provided."""


class TruncationWarning(UserWarning):
    """A transform or series was truncated at a point that may matter."""
