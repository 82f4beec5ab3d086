"""Exception hierarchy. Each class maps to one CLI exit code."""


class MirrorkError(Exception):
    exit_code = 1


class ValidationError(MirrorkError, ValueError):
    """Malformed or inconsistent input."""

    exit_code = 2


class UnsupportedError(MirrorkError):
    """Input is valid but exceeds a configured size or rank cap."""

    exit_code = 3


class ConsistencyError(MirrorkError, AssertionError):
    """An internal cross-check failed. Always a bug."""

    exit_code = 4
