"""Exception hierarchy."""


class SmoothFloodError(Exception):
    """Base class for all package errors."""


class UsageError(SmoothFloodError, ValueError):
    """An operation was called with arguments violating its contract."""


class ConfigError(SmoothFloodError, ValueError):
    """An experiment, model or adversary configuration violates a premise."""


class BudgetExceededError(UsageError):
    """A brute-force oracle was asked for an instance beyond its budget."""


class SamplerStarvationError(SmoothFloodError, RuntimeError):
    """Rejection sampling exceeded its retry ceiling."""

    def __init__(self, message, retries):
        super().__init__(message)
        self.retries = retries
