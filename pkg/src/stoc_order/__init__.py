"""Order and structure selection for AR/ARMA models by stochastic complexity."""
from __future__ import annotations

from .errors import (AdmissibilityError, CacheIOError, ConfigurationError, DegeneracyError,
                     DegenerateInputError, DomainError, MissingIntegralError,
                     SingularDesignError, StocOrderError)
from .model_core import CoeffModel, RootConfig, RootModel, TimeSeries, simulate
from .quasi_mc import IntegralTable, integrate_sqrt_fim

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityError", "CacheIOError", "CoeffModel", "ConfigurationError",
    "DegeneracyError", "DegenerateInputError", "DomainError", "IntegralTable",
    "MissingIntegralError", "RootConfig", "RootModel", "SingularDesignError",
    "StocOrderError", "TimeSeries", "integrate_sqrt_fim", "simulate", "__version__",
]
