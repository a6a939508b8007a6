"""Exception types raised by mietalbot."""


class MieTalbotError(Exception):
    """Base class for all package errors."""


class DomainError(MieTalbotError, ValueError):
    """An argument lies outside the domain of an operation."""


class DegeneratePermittivityError(DomainError):
    """The permittivity makes eps + 2 vanish (resonant Clausius-Mossotti factor)."""


class ConvergenceError(MieTalbotError, RuntimeError):
    """A series or quadrature did not reach its target tolerance.

    ``achieved`` carries the last error estimate, when one is available.
    """

    def __init__(self, message: str, achieved: float | None = None):
        super().__init__(message)
        self.achieved = achieved


class ConfigError(MieTalbotError, ValueError):
    """A configuration file or value could not be interpreted."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        super().__init__(message)
        self.key = key
        self.line = line
