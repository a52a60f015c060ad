"""Exception hierarchy shared across the package.

The CLI maps these to exit code 2 (validation / usage); plain OSError from
file access maps to exit code 1.
"""


class HideError(Exception):
    """Base class for all pipeline errors."""


class FormatError(HideError):
    """File is not in the expected format (bad magic, unparseable header)."""


class CorruptionError(HideError):
    """File structure disagrees with its own header (truncated, trailing bytes)."""


class ValidationError(HideError):
    """An invariant or parameter constraint is violated."""
