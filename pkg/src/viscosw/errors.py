"""Exception hierarchy shared across the package."""

from __future__ import annotations


class ViscoSWError(Exception):
    """Base class for all package errors."""


class InadmissibleState(ViscoSWError):
    """A state lies outside the admissible domain.

    Attributes:
        violations: Names of the failed inequalities.
    """

    def __init__(self, message: str, violations: list[str] | None = None):
        super().__init__(message)
        self.violations = list(violations or [])


class ParameterSearchExhausted(ViscoSWError):
    """The relaxation parameter search hit a hard cap."""

    def __init__(self, message: str, pair=None):
        super().__init__(message)
        self.pair = pair


class DegenerateParams(ViscoSWError):
    """Relaxation parameters would divide by zero."""


class CapTooSmall(ViscoSWError):
    """The time fraction available to an interface is below its max wave speed."""


class BadDimensions(ViscoSWError):
    """Invalid mesh dimensions."""


class CFLViolated(ViscoSWError):
    """The time step exceeds the stability bound."""


class DiffusionCFLViolated(CFLViolated):
    """The time step exceeds the explicit diffusion bound."""


class InadmissibleResult(ViscoSWError):
    """A sub-step produced an inadmissible cell (solver bug)."""


class ConfigError(ViscoSWError):
    """Base class for configuration errors."""


class ParseError(ConfigError):
    """Malformed configuration text.

    Attributes:
        line: 1-based line number.
        column: 1-based column number.
    """

    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class UnknownKey(ConfigError):
    """A configuration key or section is not recognised."""


class OutOfRange(ConfigError):
    """A configuration value is outside its allowed range."""


class IoError(ViscoSWError):
    """Failure while reading or writing output files."""
