"""Exception hierarchy.

Two branches matter to callers: ValidationError for malformed inputs and
configuration (the CLI maps it to exit code 2), and NumericalError for
conditions detected while computing (exit code 3).
"""


class CurveForgeError(Exception):
    """Base class for all package errors."""


class ValidationError(CurveForgeError, ValueError):
    """Invalid argument, file, or configuration."""


class DomainError(ValidationError):
    """Argument outside the mathematical domain of an operation."""


class NumericalError(CurveForgeError):
    """A computation hit a state it cannot handle."""


class RegularityError(NumericalError):
    """Curve speed vanishes somewhere; the frame is not defined."""


class FrameUndefinedError(NumericalError):
    """All usable derivative orders vanish; no frame at this sample."""


class DegenerateFrameError(NumericalError):
    """Parallel vectors where a frame construction needs independence."""


class PreconditionError(NumericalError):
    """An operation's mathematical precondition does not hold."""


class EvaluationError(NumericalError):
    """A loss or gradient evaluation produced a non-finite value."""
