"""Exception types shared across the package."""


class ElsdError(Exception):
    """Base class for all library errors."""


class InvalidInputError(ElsdError):
    """Input data violates a precondition (non-finite, wrong shape, ...)."""


class InvalidParameterError(ElsdError):
    """A numeric parameter is out of its valid range."""


class GeometryError(ElsdError):
    """Frame geometry is inconsistent or too small for the requested operation."""


class ScenarioError(ElsdError):
    """A synthetic scenario cannot be realised (e.g. targets do not fit)."""


class DegenerateInputError(ElsdError):
    """Input is degenerate for the requested operation (e.g. all-zero matrix)."""


class DataFormatError(ElsdError):
    """A file on disk does not match the documented format."""


class ProxStalledError(ElsdError):
    """The dual prox solver did not certify optimality within its sweep cap.

    Carries the last duality gap (``gap``) and, when raised from a batch,
    the offending frame indices (``frames``).
    """

    def __init__(self, message, gap=None, frames=None):
        super().__init__(message)
        self.gap = gap
        self.frames = frames
