"""Error taxonomy shared across modules and mapped to CLI exit codes."""
from __future__ import annotations


class ConfigError(ValueError):
    """Invalid configuration or argument values (CLI exit code 2)."""

    def __init__(self, message: str, path: tuple = ()):
        super().__init__(message)
        self.path = tuple(path)


class NumericalError(RuntimeError):
    """Numerical failure: divergence, NaN, or violated invariant (exit code 3)."""
