"""Exception hierarchy. Each class carries the CLI exit code it maps to."""

from __future__ import annotations


class SvError(Exception):
    exit_code = 5


class UsageError(SvError):
    exit_code = 2


class ConfigError(SvError, ValueError):
    exit_code = 3


class ParameterError(ConfigError):
    """Invalid distribution or model parameter; ``field`` names the offender."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class UnsupportedModelError(ConfigError):
    pass


class BudgetError(ConfigError):
    pass


class PreconditionError(ConfigError):
    pass


class IngestionError(SvError):
    """Bad input file. ``row``/``column`` locate the problem when known."""

    exit_code = 4

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
        self.row = row
        self.column = column


class NumericError(SvError):
    exit_code = 5


class InsufficientTailError(NumericError):
    pass


class DegenerateRowError(NumericError):
    def __init__(self, message: str, row: int):
        super().__init__(message)
        self.row = row


class ContractError(NumericError):
    pass
