"""Exception hierarchy shared by every collision_reflex module."""

from __future__ import annotations

import math
from typing import TYPE_CHECKING

if TYPE_CHECKING:  # pragma: no cover
    from .forcetrace import ForceTrace


class ReflexError(Exception):
    """Base class for all errors raised by collision_reflex."""


class ReflexDomainError(ReflexError, ValueError):
    """A physical quantity is outside the domain of the model."""


class SingularConfiguration(ReflexDomainError):
    """The contact Jacobian is (numerically) singular at the requested configuration."""

    def __init__(self, message: str, det: float = 0.0) -> None:
        super().__init__(message)
        self.det = det


class LockedDirection(ReflexDomainError):
    """The collision direction has no mobility, so the effective mass is infinite."""


class SimulationHorizonError(ReflexError):
    """The simulated collision did not finish before ``t_max``.

    The trace recorded up to the horizon is kept on ``partial`` so callers can
    inspect how far the collision got.
    """

    def __init__(self, message: str, partial: ForceTrace | None = None) -> None:
        super().__init__(message)
        self.partial = partial


class TraceParseError(ReflexError):
    """A force trace file could not be parsed."""

    def __init__(self, message: str, line: int | None = None) -> None:
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SegmentationError(ReflexError):
    """No contact episode, or more than one, was found in a trace."""


class ConfigError(ReflexError):
    """Invalid run configuration or override."""


def require_positive(**values: float) -> None:
    """Raise :class:`ReflexDomainError` unless every value is finite and > 0."""
    for name, value in values.items():
        if not (0 < value < math.inf):
            raise ReflexDomainError(f"{name} must be positive and finite, got {value!r}")


def require_non_negative(**values: float) -> None:
    """Raise :class:`ReflexDomainError` unless every value is finite and >= 0."""
    for name, value in values.items():
        if not (0 <= value < math.inf):
            raise ReflexDomainError(f"{name} must be non-negative and finite, got {value!r}")
