"""Exception types shared across wavecrest."""


class WavecrestError(Exception):
    """Base class for all package errors."""


class KernelRangeError(WavecrestError, ArithmeticError):
    """A kernel moment overflowed at the given argument."""

    def __init__(self, message, w=None):
        super().__init__(message)
        self.w = w


class BracketError(WavecrestError, ArithmeticError):
    """A root or minimum could not be bracketed."""


class HypothesisError(WavecrestError, ValueError):
    """A birth function violates a structural requirement."""


class ConfigError(WavecrestError, ValueError):
    """Invalid run configuration."""


class DomainError(WavecrestError, ValueError):
    """A quantity was requested outside its domain of definition."""
