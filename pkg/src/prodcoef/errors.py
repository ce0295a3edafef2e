"""Exception types shared across the pipeline.

Exit codes follow the CLI contract: 1 validation, 2 I/O or format,
3 data consistency.
"""


class ProdcoefError(Exception):
    exit_code = 1


class ValidationError(ProdcoefError):
    """Bad parameter, violated precondition, or out-of-domain input."""

    exit_code = 1


class FormatError(ProdcoefError):
    """Input file is not readable in the declared format."""

    exit_code = 2


class UnsupportedError(FormatError):
    """Recognized container, but a version or variant we do not read."""

    exit_code = 2


class ConsistencyError(ProdcoefError):
    """Data contradicts itself: truncated body, broken additivity, ..."""

    exit_code = 3
