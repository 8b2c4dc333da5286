"""Exception hierarchy shared across the package."""


class MoralFramesError(Exception):
    """Base class for all package errors."""


class DataError(MoralFramesError):
    """Malformed or inconsistent input data."""


class ProgramError(MoralFramesError):
    """Rule-program parse or validation failure."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}" + (f", col {column}" if column is not None else "") + f": {message}"
        super().__init__(message)


class GroundingError(MoralFramesError):
    """Grounding failed or exceeded its size guard."""


class SolverError(MoralFramesError):
    """MAP inference failed (infeasible, cap exceeded, bad weights)."""


class ConfigError(MoralFramesError):
    """Invalid pipeline configuration."""
