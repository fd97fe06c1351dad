"""Exception hierarchy shared across the package."""

from __future__ import annotations


class IFDKFError(Exception):
    """Base class for all package errors."""


class ConfigurationError(IFDKFError, ValueError):
    """Invalid model, topology, schedule or scenario configuration."""


class QueryError(IFDKFError, KeyError):
    """Graph query on an unknown, dead or empty node set."""

    def __str__(self) -> str:
        # KeyError quotes its argument; keep messages readable.
        return str(self.args[0]) if self.args else ""


class UnobservableError(IFDKFError, ArithmeticError):
    """Normal matrix of a least-squares problem is singular."""


class NumericalDegeneracyError(IFDKFError, ArithmeticError):
    """A covariance that must be positive definite is not, even after jitter."""

    def __init__(self, message: str, *, tick: int | None = None,
                 node: int | None = None, filter: str | None = None):
        self.tick = tick
        self.node = node
        self.filter = filter
        super().__init__(message)

    def with_context(self, **context) -> "NumericalDegeneracyError":
        for key, value in context.items():
            if getattr(self, key, None) is None:
                setattr(self, key, value)
        return self

    def __str__(self) -> str:
        parts = [f"{k}={getattr(self, k)}" for k in ("tick", "node", "filter")
                 if getattr(self, k) is not None]
        base = super().__str__()
        return f"{base} ({', '.join(parts)})" if parts else base


class OracleError(IFDKFError, ArithmeticError):
    """The exact joint-covariance oracle could not be evaluated."""


class IncompleteTraceError(IFDKFError, LookupError):
    """Metrics were requested for a tick/filter with missing trace rows."""
