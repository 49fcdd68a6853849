"""Exception hierarchy shared by all modules.

The CLI maps every :class:`DataError` subclass to exit code 3.
"""


class EprError(Exception):
    """Base class for all errors raised by this package."""


class DataError(EprError):
    """Input data is malformed, inconsistent, or violates an invariant."""


class FormatError(DataError):
    """A file does not follow the expected layout (bad magic, unknown token)."""


class TruncationError(FormatError):
    """A binary payload is shorter or longer than its header announces."""


class ValidationError(DataError):
    """Values violate a domain invariant (non-finite entries, empty sets)."""


class IndexRangeError(DataError):
    """An index lies outside the valid range of its descriptor set."""


class DomainError(DataError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""
