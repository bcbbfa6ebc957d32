"""Exception hierarchy shared across the toolkit.

CLI exit-code mapping: UsageError -> 1, DataError (and subclasses) -> 2,
NumericalError -> 3.
"""


class StancekitError(Exception):
    """Base class for all toolkit errors."""


class UsageError(StancekitError):
    """Bad invocation: unknown flags, missing config keys, invalid values."""


class DataError(StancekitError):
    """Malformed or inconsistent input data."""


class FormatError(DataError):
    """Binary/file format violation; carries the byte offset when known."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NumericalError(StancekitError):
    """Non-finite values or numerically impossible requests."""
