"""Distributed Kalman filtering on sensor networks with naive nodes."""

from .errors import (ConfigurationError, IFDKFError, IncompleteTraceError,
                     NumericalDegeneracyError, OracleError, QueryError, UnobservableError)

__version__ = "0.1.0"

__all__ = ["ConfigurationError", "IFDKFError", "IncompleteTraceError", "NumericalDegeneracyError",
           "OracleError", "QueryError", "UnobservableError", "__version__"]
