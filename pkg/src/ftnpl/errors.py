"""Exception types shared across the package."""


class FtnplError(Exception):
    """Base class for all package errors."""


class ConfigError(FtnplError, ValueError):
    """Invalid configuration or mismatched dimensions."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class PreconditionError(FtnplError, ValueError):
    """An operation was called outside its domain (empty queue, boundary simplex point...)."""


class NumericError(FtnplError, ArithmeticError):
    """A non-finite value appeared, or a state drifted off its manifold."""

    def __init__(self, message, op=None):
        super().__init__(message if op is None else f"[{op}] {message}")
        self.op = op
