"""Exception hierarchy shared by all texkit modules.

Argument/precondition misuse raises plain ``ValueError`` (usage, CLI exit 2).
Data-dependent failures raise ``TexkitError`` subclasses (CLI exit 3), and
numerical breakdown raises ``NumericError`` (CLI exit 4).
"""


class TexkitError(Exception):
    """Base class for data-level failures."""

    exit_code = 3


class DomainError(TexkitError):
    """An image arrived in the wrong pixel-value domain."""


class GeometryError(TexkitError):
    """Image geometry cannot satisfy the requested operation."""


class FormatError(TexkitError):
    """A file could not be parsed as the expected format."""


class NumericError(TexkitError):
    """A computation produced non-finite or degenerate values."""

    exit_code = 4
