"""
Exception hierarchy for the twisted double-slit simulator.
The CLI maps these onto process exit codes in one place.
"""

from typing import Any, Dict, Optional


class TwistedSlitError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 1


class ConfigError(TwistedSlitError):
    """Run configuration could not be parsed or validated."""

    exit_code = 2

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.key = key
        self.line = line
        location = ""
        if key:
            location += f" [key: {key}]"
        if line:
            location += f" [line {line}]"
        super().__init__(f"{message}{location}")


class DomainError(TwistedSlitError, ValueError):
    """A precondition on an operation's inputs (a config value or command-line option) was violated."""

    exit_code = 2


class RangeError(DomainError):
    """A lookup fell outside the sampled domain."""


class MissingModeError(TwistedSlitError, LookupError):
    """A per-mode map has no entry for a requested azimuthal index."""

    def __init__(self, ell: int):
        self.ell = ell
        super().__init__(f"no entry for mode l={ell}")


class NumericError(TwistedSlitError):
    """Base class for numeric failures; carries partial diagnostics."""

    exit_code = 3

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        self.diagnostics = diagnostics or {}
        if self.diagnostics:
            details = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
            message = f"{message} ({details})"
        super().__init__(message)


class ConvergenceError(NumericError):
    """An iteration or quadrature did not reach its tolerance."""


class ResolutionError(NumericError):
    """A sampling grid does not resolve the function it carries."""


class ConsistencyError(NumericError):
    """An internal cross-check failed."""


class FitError(NumericError):
    """Nonlinear least squares did not produce a usable fit."""


class DegenerateFieldError(NumericError):
    """A field has no structure to measure (zero peak, threshold never met)."""
