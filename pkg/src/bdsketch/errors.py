"""Exception types shared across the package."""


class SketchError(Exception):
    """Base class for all errors raised by bdsketch."""


class ParameterError(SketchError, ValueError):
    """A constructor or operation received an out-of-domain parameter."""


class ModelViolationError(SketchError, ValueError):
    """A delete was observed that cannot occur in a strict bounded-deletion stream."""

    def __init__(self, message: str, position: int | None = None):
        super().__init__(message)
        self.position = position


class EmptySketchError(SketchError, LookupError):
    """The operation needs at least one monitored entry."""


class StreamParseError(SketchError, ValueError):
    """Malformed stream file. ``lineno`` is 1-based."""

    def __init__(self, message: str, lineno: int):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class GuaranteeViolation(SketchError, AssertionError):
    """A guarantee-grade configuration broke one of its proven error bounds."""
