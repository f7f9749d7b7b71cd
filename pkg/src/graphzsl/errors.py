"""Exception types shared across the package."""


class GraphZslError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(GraphZslError):
    """Shapes or sizes are inconsistent with an operation's contract."""


class ContractError(GraphZslError):
    """A caller violated a documented precondition."""


class InputError(GraphZslError):
    """User-supplied data is invalid (unknown ids, bad values)."""


class ParseError(GraphZslError):
    """A file could not be parsed; message carries the line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericError(GraphZslError):
    """A computation produced non-finite values."""


class IntegrityError(GraphZslError):
    """A stored artifact is corrupt or inconsistent with the run."""
