"""Exception types shared across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """An argument lies outside the domain of a formula."""


class UnsupportedCaseError(ValueError):
    """A parameter combination for which no closed form exists."""


class NonConvergenceError(ArithmeticError):
    """A numerical procedure stopped before reaching its tolerance."""


class ConfigError(ValueError):
    """Invalid experiment configuration.

    Parameters
    ----------
    message : str
        Human-readable description.
    line : int, optional
        1-based line number in the config file.
    field : str, optional
        Offending key.
    """

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.field = field
