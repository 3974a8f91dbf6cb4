"""Exception types raised across the simulator."""


class SimError(Exception):
    """Base class for every error raised by this package."""


class SpecSyntaxError(SimError):
    """A workflow or scenario document could not be parsed."""


class ValidationError(SimError):
    """A document parsed but violates a structural or value constraint.

    ``where`` names the offending step id or dotted field path.
    """

    def __init__(self, message, where=None):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


class NegativeDelay(SimError):
    pass


class HandlerFailure(SimError):
    """An event handler raised; carries the event's seq and fire time."""

    def __init__(self, seq, fire_at, cause):
        self.seq = seq
        self.fire_at = fire_at
        self.cause = cause
        super().__init__(f"handler failed for event seq={seq} at t={fire_at}: {cause!r}")


class RequestExceedsLargestNode(SimError):
    pass


class DoubleRelease(SimError):
    pass


class UnknownStep(SimError):
    pass


class DuplicateCompletion(SimError):
    pass


class InconsistentState(SimError):
    pass


class EmptyBatch(SimError):
    pass


class TooFewBatches(SimError):
    pass


class WindowTooShort(SimError):
    pass


class OverloadedWindow(SimError):
    """Little's-law check requested on a window that is not in steady state."""
