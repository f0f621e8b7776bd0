"""Exception types shared across the package."""

from __future__ import annotations


class ParlmcError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(ParlmcError):
    """Invalid sizes, options, schemas, or parameter combinations."""


class DomainError(ParlmcError):
    """Numeric input outside the mathematical domain (non-finite, negative, ...)."""


class DivergenceError(ParlmcError):
    """A chain left the stability region; carries diagnostics and the partial trace."""

    def __init__(self, message, iteration=None, norm=None, trace=None):
        super().__init__(message)
        self.iteration = iteration
        self.norm = norm
        self.trace = trace


class RoundExecutionError(ParlmcError):
    """A gradient worker failed; carries the index of the failing round slot."""

    def __init__(self, message, index):
        super().__init__(message)
        self.index = index


class InternalError(ParlmcError):
    """A supposedly unreachable state was reached (broken internal invariant)."""
