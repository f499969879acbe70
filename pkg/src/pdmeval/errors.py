from __future__ import annotations


class PdmError(ValueError):
    """Base class for every error raised by pdmeval."""


class DomainError(PdmError):
    """An argument lies outside the mathematical domain of an operation."""


class DegenerateFitError(PdmError):
    """Two CDF points do not determine a distribution."""


class InputError(PdmError):
    """A trace, truth, or report input is malformed or inconsistent."""

    def __init__(self, message: str, *, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NumericalError(PdmError):
    """A numerical routine failed (factorization, non-positive denominator)."""


class ConfigError(PdmError):
    """Configuration or command-line flags are invalid or contradictory."""


class InfeasiblePerfectError(PdmError):
    """The perfect ordering baseline cannot order early enough for a unit."""

    def __init__(self, unit_id: str, message: str) -> None:
        self.unit_id = unit_id
        super().__init__(f"unit {unit_id}: {message}")


__all__ = [
    "ConfigError",
    "DegenerateFitError",
    "DomainError",
    "InfeasiblePerfectError",
    "InputError",
    "NumericalError",
    "PdmError",
]
