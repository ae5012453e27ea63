"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`MarkovCSError`; the CLI maps the three families onto exit codes
(validation 2, capacity 3, numerical 4).
"""


class MarkovCSError(Exception):
    """Base class for package errors."""

    exit_code = 1


class ValidationError(MarkovCSError, ValueError):
    """Invalid parameter, malformed input or inconsistent state."""

    exit_code = 2


class DimensionError(ValidationError):
    """Array shapes or grid sizes incompatible with the operation."""


class GridIndexError(ValidationError, IndexError):
    """A k-space index lies outside the grid."""


class CapacityError(MarkovCSError):
    """A dense computation would exceed its size guard."""

    exit_code = 3


class NumericalError(MarkovCSError, RuntimeError):
    """An iterative computation failed to produce a usable value."""

    exit_code = 4


class NotFittedError(ValidationError, AttributeError):
    """Estimator used before ``fit``."""


class UnsupportedError(ValidationError):
    """The operation's theory does not cover this input (e.g. non-reversible kernel)."""
