"""Error kinds raised across the package.

Argument-like failures also derive from ``ValueError`` so callers that only
know the standard library still catch them.
"""


class PMCError(Exception):
    """Base class of every error raised by pmc."""


class InputShapeError(PMCError, ValueError):
    pass


class StateError(PMCError):
    pass


class LabelError(PMCError, ValueError):
    pass


class ArgumentError(PMCError, ValueError):
    pass


class SpecError(PMCError, ValueError):
    pass


class SchemaError(PMCError, ValueError):
    pass


class IdempotenceError(SchemaError):
    pass


class DatasetParseError(PMCError, ValueError):
    """Malformed dataset file. ``line`` is 1-based, ``field`` names the column."""

    def __init__(self, message: str, line: int = None, field: str = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


class BatchError(PMCError, ValueError):
    pass


class ContractViolationError(PMCError, ValueError):
    pass


class DatasetError(PMCError, ValueError):
    pass


class ModalityError(PMCError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ScheduleOverflowError(PMCError):
    pass


class BoxError(PMCError, ValueError):
    pass


class SelectionError(PMCError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class PairingError(PMCError, ValueError):
    pass


class ConditioningError(PMCError, ValueError):
    pass


class UnsupportedConfigurationError(PMCError):
    pass


class ConfigError(PMCError, ValueError):
    pass


class ReportError(PMCError):
    pass


class CheckpointError(PMCError, IOError):
    pass
