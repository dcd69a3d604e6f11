"""Exception taxonomy shared across the package.

All errors raised on bad user input derive from :class:`FracLabError`, so
callers can catch a single base class at CLI boundaries while tests pin the
specific subclass.
"""

from __future__ import annotations

__all__ = [
    "FracLabError",
    "ParameterError",
    "RangeError",
    "ShapeError",
    "CapabilityError",
    "PathTruncationError",
]


class FracLabError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(FracLabError, ValueError):
    """A scalar parameter (order, exponent, tolerance, ...) is out of range."""


class RangeError(FracLabError, ValueError):
    """A field was evaluated outside its declared time range."""


class ShapeError(FracLabError, ValueError):
    """Dimension mismatch between a point, a domain, or an array argument."""


class CapabilityError(FracLabError, NotImplementedError):
    """A backend was asked for a combination it does not support."""


class PathTruncationError(FracLabError, RuntimeError):
    """A path simulation hit ``max_steps`` before any stopping event.

    The partially accumulated sample is attached so callers can decide
    whether to discard, extend, or report it.
    """

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial
