"""Shared exception hierarchy.

Everything raised on purpose by this package derives from GripstreamError,
so the CLI can map pipeline failures to one exit code without masking real
bugs (which surface as ordinary exceptions).
"""


class GripstreamError(Exception):
    """Base class for all errors raised by the gripstream pipeline."""


class DomainError(GripstreamError, ValueError):
    """An input is outside the physical or calibrated domain of an operation."""


class ConfigError(GripstreamError, ValueError):
    """Invalid configuration value, plan, or config file content."""
