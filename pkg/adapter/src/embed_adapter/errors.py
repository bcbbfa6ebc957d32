"""Failure types for the exporter; the CLI maps each to an exit code."""


class AdapterError(Exception):
    """Base class for everything this package raises on purpose."""


class UsageError(AdapterError):
    """Bad flags or configuration values."""


class DataError(AdapterError):
    """The input corpus or a produced artifact violates a contract."""


class ModelError(AdapterError):
    """The encoder backend could not be loaded or returned garbage."""
