"""Exception types shared across the library and mapped to CLI exit codes."""


class ScboundsError(Exception):
    """Base class for all scbounds errors."""


class InputDataError(ScboundsError, ValueError):
    """A file or table could not be parsed (CLI exit code 2)."""


class SchemaViolationError(ScboundsError, ValueError):
    """Inputs parse but violate a contract: unknown unit, missing
    distribution, incompatible dimensions (CLI exit code 3)."""


class NumericalFailureError(ScboundsError, RuntimeError):
    """An optimizer or solver failed to produce a finite result
    (CLI exit code 4)."""
