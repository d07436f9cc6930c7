"""Exception types shared across the package.

Each class carries the process exit code the CLI maps it to, so command
handlers can translate failures uniformly.
"""

from __future__ import annotations


class TunerError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class UsageError(TunerError):
    """Bad arguments, violated preconditions, or misuse of an API."""

    exit_code = 2


class DataError(TunerError):
    """Missing, malformed, or corrupt input data."""

    exit_code = 3


class NumericError(TunerError):
    """Non-finite values or other numeric failures."""

    exit_code = 4
