"""Exception hierarchy shared by the whole package.

The split matters for the CLI exit codes: bad inputs or configuration map
to 2, numerical breakdowns (singular covariance, training divergence) map
to 3, and unreadable or malformed files map to 4.
"""


class DialectIdError(Exception):
    """Base class for all package errors."""


class ValidationError(DialectIdError):
    """Input data, labels, or configuration violate a documented contract."""


class NumericError(DialectIdError):
    """A numerical operation degenerated (singularity, divergence, zero norm)."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history


class FormatError(DialectIdError):
    """A file could not be parsed in one of the documented formats."""
