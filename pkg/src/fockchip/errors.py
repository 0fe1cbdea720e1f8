"""Exception types raised across the package."""


class FockChipError(Exception):
    """Base class for all package errors."""


class DimensionError(FockChipError, ValueError):
    pass


class DomainError(FockChipError, ValueError):
    pass


class InvalidTransitionError(FockChipError, ValueError):
    pass


class DegenerateTableError(FockChipError, ValueError):
    pass


class StreamOrderError(FockChipError, ValueError):
    pass


class FitError(FockChipError, RuntimeError):
    """A least-squares fit failed or its input was degenerate."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
