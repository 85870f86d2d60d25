"""Exception hierarchy shared across the package."""


class StocOrderError(Exception):
    """Base class for all package errors."""


class AdmissibilityError(StocOrderError, ValueError):
    """Model is not stable / minimum phase, or a parameter is out of range."""


class DegeneracyError(AdmissibilityError):
    """Repeated roots or a pole-zero cancellation."""


class DomainError(AdmissibilityError):
    """Parameter point on or outside the boundary of the admissible region."""


class SingularDesignError(StocOrderError, ValueError):
    """Regressor matrix does not have full row rank."""


class DegenerateInputError(StocOrderError, ValueError):
    """Input series carries no information (e.g. identically zero)."""


class MissingIntegralError(StocOrderError, KeyError):
    """No cached Fisher-information integral for the requested structure."""

    def __str__(self):
        return str(self.args[0]) if self.args else "missing integral"


class CacheIOError(StocOrderError, OSError):
    """Reading or writing the integral cache failed."""


class ConfigurationError(StocOrderError, ValueError):
    """Invalid generator or experiment configuration."""
