"""Exception hierarchy.

``DataError`` covers anything the user can fix (bad files, bad config,
inconsistent shapes). ``DivergenceError`` signals a numerical failure inside
training or search.
"""


class ImputeError(Exception):
    """Base class for all errors raised by this package."""


class DataError(ImputeError, ValueError):
    """Invalid input data, schema or configuration."""


class SchemaError(DataError):
    """Malformed schema or a record that does not match it."""


class DivergenceError(ImputeError, ArithmeticError):
    """A loss or error function produced a non-finite value."""


class ReportError(ImputeError):
    """An emitted report violates a structural invariant."""
