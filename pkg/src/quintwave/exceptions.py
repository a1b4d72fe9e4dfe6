"""Exception types shared across the package."""

from __future__ import annotations


class ParameterError(ValueError):
    """A constructor or function argument is outside its allowed range."""


class DomainError(ValueError):
    """A requested evaluation leaves the region a grid or run can support."""


class ConfigError(ValueError):
    """A run configuration is malformed.

    Carries the offending field name so the CLI can report it.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"config field {field!r}: {message}")


class AccuracyError(RuntimeError):
    """A certified tolerance could not be met."""


class CflError(RuntimeError):
    """The time step violates the stability bound, or the metric degenerated."""


class BlowupError(RuntimeError):
    """The evolution produced non-finite values.

    The last finite state is attached so callers can dump it.
    """

    def __init__(self, message: str, state=None, step: int | None = None):
        self.state = state
        self.step = step
        super().__init__(message)
