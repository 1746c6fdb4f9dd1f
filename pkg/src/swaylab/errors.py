"""Exception types shared across the package."""


class SwaylabError(Exception):
    """Base class for all errors raised by swaylab."""


class ParseError(SwaylabError):
    """A file could not be parsed. Carries the offending line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(SwaylabError):
    """Input data violates a documented invariant."""


class TooShortError(ValidationError):
    """A recording or series is shorter than one analysis window."""


class ParameterError(SwaylabError):
    """An operation was called with out-of-range parameters."""


class ConvergenceError(SwaylabError):
    """An iterative solver failed to converge within its iteration cap."""
