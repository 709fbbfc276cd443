"""Error taxonomy shared by all modules."""


class TddebifError(Exception):
    """Base class for all library-specific failures."""


class DomainError(TddebifError):
    """Evaluation at a set-valued point or outside a function's domain."""


class RegimeError(TddebifError):
    """Operation valid only in another parameter regime."""


class ContourError(TddebifError):
    """A characteristic root lies (numerically) on the counting contour."""


class CurveLostError(TddebifError):
    """Continuation corrector failed at minimum step.

    Carries the last successfully computed point, if any.
    """

    def __init__(self, message, last_point=None):
        super().__init__(message)
        self.last_point = last_point


class StepFailureError(TddebifError):
    """Integrator monitor tripped (delay bracket, deviated-argument order,
    or a non-finite state)."""


class HistoryTooShortError(TddebifError):
    """Tabulated history does not span the initial delay interval."""


class NoOscillationError(TddebifError):
    """Too few section crossings to measure a period."""


class InconclusiveError(TddebifError):
    """Criticality probes at the two offsets disagree."""
