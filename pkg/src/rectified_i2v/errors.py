"""Exception hierarchy.

Every error carries a ``category`` from the fixed taxonomy
``config | shape | numeric | io`` so that command-line failures can be
reported as a single machine-parseable line.
"""


class RectifyError(Exception):
    category = "numeric"


class ConfigError(RectifyError, ValueError):
    category = "config"


class ShapeError(RectifyError, ValueError):
    category = "shape"


class NumericError(RectifyError, ArithmeticError):
    category = "numeric"


class FormatError(RectifyError, OSError):
    """Malformed file on disk."""

    category = "io"


def error_category(exc: BaseException) -> str:
    if isinstance(exc, RectifyError):
        return exc.category
    if isinstance(exc, OSError):
        return "io"
    if isinstance(exc, (ValueError, TypeError, KeyError)):
        return "config"
    return "numeric"
