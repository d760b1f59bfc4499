"""Shared exception types.

All inherit from ValueError so callers can catch broadly; the subclasses
exist to distinguish configuration mistakes (bad specs, bad CLI input)
from data problems detected at runtime.
"""


class ConfigurationError(ValueError):
    """A spec, config file or parameter is structurally invalid."""


class ValidationError(ValueError):
    """Input data violates a documented precondition."""


class ShapeError(ValueError):
    """Array dimensions do not match."""


class DegenerateInputError(ValueError):
    """Input is valid but statistically degenerate (e.g. zero variance)."""
