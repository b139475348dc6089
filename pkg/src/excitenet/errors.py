"""Exception hierarchy shared across the pipeline.

Each class carries the CLI exit code it maps to: 2 for configuration
problems, 3 for unreadable or malformed inputs, 4 for numeric failures.
"""


class ExciteNetError(Exception):
    exit_code = 1


class ConfigError(ExciteNetError):
    """Bad configuration: unknown keys, inconsistent parameters, missing config file."""

    exit_code = 2


class InputError(ExciteNetError):
    """Unreadable or malformed input data."""

    exit_code = 3


class NumericError(ExciteNetError):
    """Numeric failure during model fitting or evaluation."""

    exit_code = 4


class StabilityError(NumericError):
    """Non-stationary network: spectral radius of the weight matrix is >= 1."""


class StageError(ExciteNetError):
    """Wraps a failure with the pipeline stage it occurred in."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}': {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)
