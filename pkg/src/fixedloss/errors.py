"""Exception hierarchy shared by every module."""

from __future__ import annotations


class FixedLossError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(FixedLossError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(FixedLossError):
    pass


class InsufficientDataError(FixedLossError):
    pass


class ConvergenceError(FixedLossError):
    pass


class JoinError(FixedLossError):
    def __init__(self, message: str, orphans=()):
        self.orphans = list(orphans)
        if self.orphans:
            message = f"{message}: {', '.join(map(str, self.orphans))}"
        super().__init__(message)


class ConfigError(FixedLossError):
    pass
