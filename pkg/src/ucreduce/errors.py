"""Exception hierarchy shared across the package."""


class UcReduceError(Exception):
    """Base class for all package errors."""


class ParseError(UcReduceError):
    pass


class ValidationError(UcReduceError):
    pass


class DimensionMismatch(UcReduceError, ValueError):
    pass


class ConflictError(UcReduceError):
    pass


class NumericalError(UcReduceError):
    """Simplex pivot fell below the magnitude floor."""


class LimitReached(UcReduceError):
    """Raised by callers that treat a limit-reached MIP as an error.

    ``result`` carries the best incumbent found, possibly ``None``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class AttemptCapExceeded(UcReduceError):
    def __init__(self, message, feasible_count):
        super().__init__(message)
        self.feasible_count = feasible_count


class TooFewSamples(UcReduceError):
    pass


class NonFinite(UcReduceError, FloatingPointError):
    pass


class ShapeMismatch(UcReduceError, ValueError):
    pass


class StageError(UcReduceError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
