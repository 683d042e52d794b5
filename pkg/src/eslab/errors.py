"""Exception hierarchy shared by all eslab modules."""


class EslabError(Exception):
    """Base class for every error raised by eslab."""


class InputError(EslabError, ValueError):
    """Arguments violate a documented precondition."""


class DegenerateInputError(InputError):
    """Input carries no usable mass (e.g. an all-zero grid)."""


class TruncationError(InputError):
    """A density does not fit on the requested grid (clipped mass or under-resolution)."""


class UnsupportedRepresentationError(InputError):
    """The operation is not defined for the given density representation."""


class StabilityError(EslabError):
    """Explicit time step violates the CFL bound."""

    def __init__(self, message, suggested_dt=None):
        super().__init__(message)
        self.suggested_dt = suggested_dt


class BlowUpError(EslabError):
    """Integration produced non-finite or strongly negative values."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ScaleError(EslabError):
    """Problem too large for the exact transport solver."""


class ConvergenceError(EslabError):
    """Iterative solver did not reach its tolerance."""

    def __init__(self, message, violation=None):
        super().__init__(message)
        self.violation = violation


class ResolutionError(EslabError):
    """Too few snapshots to integrate a path quantity."""
