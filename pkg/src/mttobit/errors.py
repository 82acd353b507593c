"""Exception types shared across the package.

The CLI maps these onto exit codes: table-format problems exit 1,
validation problems exit 2, numerical failures exit 3.
"""


class MttobitError(Exception):
    """Base class for all package-specific errors."""


class TableFormatError(MttobitError):
    """A CSV table (or a cell in it) could not be parsed."""


class ValidationError(MttobitError):
    """Inputs are structurally well-formed but violate a documented precondition."""


class NumericalError(MttobitError):
    """A numerical step failed. Carries the sweep index when raised mid-fit."""

    def __init__(self, message, sweep=None):
        self.base_message = message
        if sweep is not None:
            message = f"{message} at sweep {sweep}"
        super().__init__(message)
        self.sweep = sweep


class SingularSystemError(NumericalError):
    """A linear system that an update step must solve is singular."""


class DegenerateUpdateError(NumericalError):
    """A closed-form update hit a degenerate configuration (e.g. zero column norm)."""
