"""Exception types shared across the package.

The split mirrors how the command line reports failures: validation problems
(bad arguments, malformed files) exit with status 2, numerical trouble and
other runtime failures with status 1.
"""

from __future__ import annotations


class InvalidInputError(ValueError):
    """An argument violates a documented precondition."""


class ConvergenceError(RuntimeError):
    """An iterative routine exhausted its iteration budget.

    Carries the last iterate so callers can inspect how far the routine got.
    """

    def __init__(self, message: str, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class DatasetError(ValueError):
    """A dataset file could not be parsed.

    ``row`` is the 1-based data row (0 for the header), ``column`` the column
    name or 1-based position, both included in the message when known.
    """

    def __init__(self, message: str, row: int | None = None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column


class ConfigError(ValueError):
    """A run-config file could not be parsed or validated.

    ``key`` names the offending entry when the failure is tied to one.
    """

    def __init__(self, message: str, key: str | None = None):
        if key is not None:
            message = f"{message} (key '{key}')"
        super().__init__(message)
        self.key = key
