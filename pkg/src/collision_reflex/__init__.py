"""Collision reflex metric: closed forms, actuator scaling, manipulator
reduction, a time-stepping oracle and force-trace analysis."""

from importlib.metadata import PackageNotFoundError, version  # pragma: no cover

try:
    # Change here if project is renamed and does not equal the package name
    dist_name = __name__
    __version__ = version(dist_name)
except PackageNotFoundError:  # pragma: no cover
    __version__ = "unknown"
finally:
    del version, PackageNotFoundError

from .errors import (  # noqa: E402
    ConfigError,
    LockedDirection,
    ReflexDomainError,
    ReflexError,
    SegmentationError,
    SimulationHorizonError,
    SingularConfiguration,
    TraceParseError,
)
from .reflex import (  # noqa: E402
    CollisionParams1D,
    ForceThreshold,
    PhaseBreakdown,
    PositionErrorThreshold,
    minimum_impulse,
    optimal_velocity,
    total_impulse,
)

__all__ = [
    "CollisionParams1D",
    "ConfigError",
    "ForceThreshold",
    "LockedDirection",
    "PhaseBreakdown",
    "PositionErrorThreshold",
    "ReflexDomainError",
    "ReflexError",
    "SegmentationError",
    "SimulationHorizonError",
    "SingularConfiguration",
    "TraceParseError",
    "minimum_impulse",
    "optimal_velocity",
    "total_impulse",
]
