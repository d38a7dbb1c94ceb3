"""Exception hierarchy shared by every module."""


class MPCError(Exception):
    """Base class for all errors raised by mpcauth."""


class InvalidArgumentError(MPCError, ValueError):
    pass


class InvalidRangeError(InvalidArgumentError):
    pass


class DegenerateLabelsError(MPCError, ValueError):
    """Raised when a calibration fit sees only one class."""


class InsufficientTrainingDataError(MPCError, ValueError):
    pass


class NoCyclesError(MPCError, ValueError):
    pass


class SchemaError(MPCError, ValueError):
    """A replay file or config violates its schema.

    ``line`` is the 1-based line number of the offending row when known.
    """

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(MPCError, ValueError):
    pass


class InvariantViolation(MPCError, RuntimeError):
    """An internal consistency check failed (a bug, not bad input)."""
