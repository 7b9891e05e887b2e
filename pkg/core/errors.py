"""Exception hierarchy for the workbench.

Every error raised by the numeric layers derives from EmimError so the CLI
can map it onto an exit code in one place.
"""

from contextlib import contextmanager


class EmimError(Exception):
    """Base class for all workbench errors."""


class DimensionError(EmimError, ValueError):
    """Operand shapes do not agree."""

    def __init__(self, message: str, *shapes):
        if shapes:
            rendered = " vs ".join(str(tuple(s)) for s in shapes)
            message = f"{message}: {rendered}"
        super().__init__(message)
        self.shapes = [tuple(s) for s in shapes]


class ConfigurationError(EmimError, ValueError):
    """A hyperparameter or structural choice is invalid for the given input."""


class StateError(EmimError, RuntimeError):
    """An operation was called without the state it depends on."""


class FixtureFormatError(EmimError, ValueError):
    """A tensor fixture file is malformed."""


class DivergenceError(EmimError, ArithmeticError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, loss: float):
        super().__init__(f"Non-finite loss {loss} at epoch {epoch}")
        self.epoch = epoch
        self.loss = loss


@contextmanager
def error_context(operation: str):
    """Re-raise shape and configuration errors prefixed with *operation*."""
    try:
        yield
    except (DimensionError, ConfigurationError) as exc:
        raise type(exc)(f"{operation}: {exc}") from exc
