"""Exception types shared across bubblescope modules."""

from __future__ import annotations


class BubblescopeError(Exception):
    """Base class for all bubblescope failures."""


class SeriesValidationError(BubblescopeError, ValueError):
    """Input series or window violates the monthly-grid contract."""


class ConfigError(BubblescopeError, ValueError):
    """Run, fit, filter or simulation configuration is invalid."""


class NumericalError(BubblescopeError, ArithmeticError):
    """A numerical procedure cannot produce a meaningful answer."""
