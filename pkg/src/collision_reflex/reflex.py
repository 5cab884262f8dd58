"""Closed-form collision reflex metric of the 1D finger/robot model.

A collision is split into three phases: the plastic impact of the finger
mass, the sensing ramp while the robot keeps its velocity, and the reaction
while the robot retracts with its peak force. The total impulse is the sum
of the three phase impulses.
"""

from __future__ import annotations

import dataclasses
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Union

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ReflexDomainError, require_non_negative, require_positive
from .parallel import ordered_map
from .scaling import MotorSweepSource

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ForceThreshold:
    F_s: float

    def __post_init__(self) -> None:
        require_positive(F_s=self.F_s)


@dataclass(frozen=True)
class PositionErrorThreshold:
    """Detection on the position-controller error; trips at ``k_s * e_s``."""

    e_s: float

    def __post_init__(self) -> None:
        require_positive(e_s=self.e_s)


SensingMode = Union[ForceThreshold, PositionErrorThreshold]


def combined_stiffness(k_m: float, k_s: float) -> float:
    """Series combination of the mechanical and software springs.

    A software stiffness of zero means the software spring is absent and only
    the mechanical compliance acts.
    """
    require_positive(k_m=k_m)
    require_non_negative(k_s=k_s)
    if k_s == 0:
        return k_m
    return k_m * k_s / (k_m + k_s)


def effective_threshold(mode: SensingMode, k_s: float) -> float:
    """Contact force at which the collision is detected, N."""
    if isinstance(mode, ForceThreshold):
        return mode.F_s
    if isinstance(mode, PositionErrorThreshold):
        require_non_negative(k_s=k_s)
        if k_s == 0:
            raise ReflexDomainError("position-error sensing needs a software stiffness k_s > 0")
        return k_s * mode.e_s
    raise ReflexDomainError(f"unknown sensing mode {mode!r}")


@dataclass(frozen=True)
class CollisionParams1D:
    """Parameters of one 1D collision, SI units.

    ``sensing_stiffness`` overrides the lumped spring of the sensing phase;
    when ``None`` it is the series combination of ``k_m`` and ``k_s``.
    """

    m_f: float
    m_r: float
    k_m: float
    k_s: float
    sensing: SensingMode
    v_0: float
    F_a: float
    sensing_stiffness: float | None = None

    def __post_init__(self) -> None:
        require_positive(m_f=self.m_f, m_r=self.m_r, k_m=self.k_m, v_0=self.v_0, F_a=self.F_a)
        require_non_negative(k_s=self.k_s)
        if self.sensing_stiffness is not None:
            require_positive(sensing_stiffness=self.sensing_stiffness)
        # Resolving the threshold validates position-error sensing against k_s.
        effective_threshold(self.sensing, self.k_s)

    @property
    def a(self) -> float:
        """Reaction acceleration of the robot mass, m/s²."""
        return self.F_a / self.m_r

    @property
    def k(self) -> float:
        """Spring acting during the sensing phase, N/m."""
        if self.sensing_stiffness is not None:
            return self.sensing_stiffness
        return combined_stiffness(self.k_m, self.k_s)

    @property
    def F_s(self) -> float:
        return effective_threshold(self.sensing, self.k_s)

    def replace(self, **changes: Any) -> CollisionParams1D:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        sensing: dict[str, Any]
        if isinstance(self.sensing, ForceThreshold):
            sensing = {"mode": "force", "F_s": self.sensing.F_s}
        else:
            sensing = {"mode": "position", "e_s": self.sensing.e_s}
        return {
            "m_f": self.m_f,
            "m_r": self.m_r,
            "k_m": self.k_m,
            "k_s": self.k_s,
            "sensing": sensing,
            "v_0": self.v_0,
            "F_a": self.F_a,
            "sensing_stiffness": self.sensing_stiffness,
        }


@dataclass(frozen=True)
class PhaseBreakdown:
    i_plastic: float
    i_sensing: float
    i_reaction: float
    total: float
    t1: float
    t2: float

    def __post_init__(self) -> None:
        require_non_negative(
            i_plastic=self.i_plastic, i_sensing=self.i_sensing, i_reaction=self.i_reaction
        )
        if not 0 < self.t1 < self.t2:
            raise ReflexDomainError(f"phase times must satisfy 0 < t1 < t2, got {self.t1}, {self.t2}")

    @classmethod
    def from_phases(
        cls, i_plastic: float, i_sensing: float, i_reaction: float, t1: float, t2: float
    ) -> PhaseBreakdown:
        return cls(i_plastic, i_sensing, i_reaction, i_plastic + i_sensing + i_reaction, t1, t2)

    def to_dict(self) -> dict[str, float]:
        return dataclasses.asdict(self)


def plastic_impulse(m_f: float, v_0: float) -> float:
    """Momentum lost by the finger mass in the plastic impact, N·s."""
    require_non_negative(m_f=m_f, v_0=v_0)
    return m_f * v_0


def sensing_time(F_s: float, k: float, v_0: float) -> float:
    """Time for the ramp ``k * v_0 * t`` to reach ``F_s``, s."""
    require_non_negative(F_s=F_s)
    require_positive(k=k, v_0=v_0)
    return F_s / (k * v_0)


def sensing_impulse(F_s: float, k: float, v_0: float) -> float:
    """Area of the force ramp between contact and detection, N·s."""
    require_non_negative(F_s=F_s)
    require_positive(k=k, v_0=v_0)
    return F_s**2 / (2.0 * k * v_0)


def reaction_duration(F_s: float, k_m: float, a: float) -> float:
    """Time from detection until the contact force returns to zero, s."""
    require_non_negative(F_s=F_s)
    require_positive(k_m=k_m, a=a)
    return math.sqrt(2.0 * F_s / (a * k_m))


def reaction_impulse(F_s: float, k_m: float, a: float) -> float:
    """Integral of ``F_s - k_m * a * t**2 / 2`` until it reaches zero, N·s."""
    require_non_negative(F_s=F_s)
    require_positive(k_m=k_m, a=a)
    return math.sqrt(8.0 * F_s**3 / (9.0 * a * k_m))


def total_impulse(p: CollisionParams1D) -> PhaseBreakdown:
    """Per-phase and total impulse of a collision.

    The sensing phase sees the lumped spring ``p.k``; the reaction phase only
    has to overcome the mechanical stiffness ``k_m`` since the software spring
    is zeroed at detection.
    """
    F_s, k = p.F_s, p.k
    t1 = sensing_time(F_s, k, p.v_0)
    return PhaseBreakdown.from_phases(
        plastic_impulse(p.m_f, p.v_0),
        sensing_impulse(F_s, k, p.v_0),
        reaction_impulse(F_s, p.k_m, p.a),
        t1,
        t1 + reaction_duration(F_s, p.k_m, p.a),
    )


def impulse_coefficients(p: CollisionParams1D) -> tuple[float, float, float]:
    """``(a, b, c)`` of ``I(v) = a*v + b/v + c``."""
    F_s = p.F_s
    return p.m_f, F_s**2 / (2.0 * p.k), reaction_impulse(F_s, p.k_m, p.a)


def bandwidths(p: CollisionParams1D) -> tuple[float, float]:
    """Natural frequencies ``(omega_s, omega_a)`` of the sensing and reaction springs, rad/s."""
    return math.sqrt(p.k / p.m_f), math.sqrt(p.k_m / p.m_r)


def optimal_velocity(F_s: float, k: float, m_f: float) -> float:
    """Pre-impact velocity minimizing the total impulse, m/s.

    At this velocity the plastic and sensing impulses are equal.
    """
    require_positive(F_s=F_s, k=k, m_f=m_f)
    return F_s / math.sqrt(2.0 * k * m_f)


def minimum_impulse(p: CollisionParams1D) -> float:
    """Total impulse at the optimal velocity, N·s."""
    v_star = optimal_velocity(p.F_s, p.k, p.m_f)
    return total_impulse(p.replace(v_0=v_star)).total


def minimum_impulse_closed_form(p: CollisionParams1D) -> float:
    """Minimum impulse written with the sensing and reaction bandwidths."""
    F_s = p.F_s
    omega_s, omega_a = bandwidths(p)
    return F_s * math.sqrt(2.0) / omega_s + (F_s / omega_a) * math.sqrt(8.0 * F_s / (9.0 * p.F_a))


def numerical_optimal_velocity(
    p: CollisionParams1D, v_min: float = 1e-6, v_max: float = 1e3
) -> float:
    """Minimize the total impulse over ``v_0`` numerically (bounded Brent on log v)."""
    require_positive(v_min=v_min, v_max=v_max)

    def objective(log_v: float) -> float:
        return total_impulse(p.replace(v_0=math.exp(log_v))).total

    result = minimize_scalar(
        objective,
        bounds=(math.log(v_min), math.log(v_max)),
        method="bounded",
        options={"xatol": 1e-11, "maxiter": 1000},
    )
    if not result.success:
        raise ReflexDomainError(f"v_0 minimization did not converge: {result.message}")
    return float(math.exp(result.x))


# Sweeps

SWEEP_AXES = {"v_0": "m/s", "r": "m", "k_m": "N/m", "k_s": "N/m"}
SWEEP_COLUMNS = (
    "m_f", "m_r", "k_m", "k_s", "F_s", "v_0", "F_a",
    "t1", "t2", "i1", "i2", "i3", "total", "feasible",
)


@dataclass(frozen=True)
class SweepAxis:
    name: str
    min: float
    max: float
    count: int
    spacing: str = "linear"

    def __post_init__(self) -> None:
        if self.name not in SWEEP_AXES:
            raise ReflexDomainError(
                f"unknown sweep axis {self.name!r}; choose from {', '.join(SWEEP_AXES)}"
            )
        if self.count < 2:
            raise ReflexDomainError(f"axis {self.name}: count must be >= 2, got {self.count}")
        if not self.min < self.max:
            raise ReflexDomainError(f"axis {self.name}: min must be below max")
        require_positive(**{f"{self.name}.min": self.min})
        if self.spacing not in ("linear", "log"):
            raise ReflexDomainError(f"axis {self.name}: spacing must be 'linear' or 'log'")

    @property
    def unit(self) -> str:
        return SWEEP_AXES[self.name]

    def values(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.min, self.max, self.count)
        return np.linspace(self.min, self.max, self.count)


@dataclass(frozen=True)
class SweepGrid:
    axes: tuple[SweepAxis, ...]
    base: CollisionParams1D

    def __post_init__(self) -> None:
        if not 1 <= len(self.axes) <= 2:
            raise ReflexDomainError(f"a sweep has one or two axes, got {len(self.axes)}")
        names = [axis.name for axis in self.axes]
        if len(set(names)) != len(names):
            raise ReflexDomainError(f"duplicate sweep axes: {names}")

    def points(self) -> list[dict[str, float]]:
        grids = [axis.values() for axis in self.axes]
        return [
            {axis.name: float(value) for axis, value in zip(self.axes, combo)}
            for combo in itertools.product(*grids)
        ]


@dataclass(frozen=True)
class SweepRow:
    point: dict[str, float]
    params: CollisionParams1D | None
    breakdown: PhaseBreakdown | None
    reason: str = ""

    @property
    def feasible(self) -> bool:
        return self.breakdown is not None

    def values(self) -> dict[str, float | bool]:
        row: dict[str, float | bool] = dict(self.point)
        p, b = self.params, self.breakdown
        nan = math.nan
        row.update(
            m_f=p.m_f if p else nan,
            m_r=p.m_r if p else nan,
            k_m=p.k_m if p else nan,
            k_s=p.k_s if p else nan,
            F_s=p.F_s if p else nan,
            v_0=p.v_0 if p else nan,
            F_a=p.F_a if p else nan,
            t1=b.t1 if b else nan,
            t2=b.t2 if b else nan,
            i1=b.i_plastic if b else nan,
            i2=b.i_sensing if b else nan,
            i3=b.i_reaction if b else nan,
            total=b.total if b else nan,
            feasible=self.feasible,
        )
        return row


@dataclass(frozen=True)
class SweepTable:
    axes: tuple[SweepAxis, ...]
    rows: list[SweepRow] = field(default_factory=list)

    @property
    def columns(self) -> list[str]:
        # Axis columns keep their own name even when they repeat a parameter.
        return [f"axis_{axis.name}" for axis in self.axes] + list(SWEEP_COLUMNS)

    @property
    def argmin(self) -> int | None:
        """Index of the feasible row with the smallest total impulse."""
        best: int | None = None
        for i, row in enumerate(self.rows):
            if row.breakdown is None:
                continue
            if best is None or row.breakdown.total < self.rows[best].breakdown.total:  # type: ignore[union-attr]
                best = i
        return best

    def records(self) -> list[list[Any]]:
        out = []
        for row in self.rows:
            values = row.values()
            out.append([row.point[axis.name] for axis in self.axes] + [values[c] for c in SWEEP_COLUMNS])
        return out


def _params_at(
    grid: SweepGrid, point: dict[str, float], motor_source: MotorSweepSource | None
) -> CollisionParams1D:
    """Base parameters with the grid point applied.

    On the motor-radius axis the scaled motor's reflected mass replaces the
    base ``m_r`` and is added to the base ``m_f``; its force capability
    replaces ``F_a``.
    """
    changes: dict[str, float] = {}
    for name, value in point.items():
        if name == "r":
            assert motor_source is not None
            terms = motor_source.collision_terms(value)
            changes["m_f"] = grid.base.m_f + terms["m_reflected"]
            changes["m_r"] = terms["m_reflected"]
            changes["F_a"] = terms["F_a"]
            logger.debug(
                f"r={value:.4g} m: m_r {grid.base.m_r:.4g} -> {changes['m_r']:.4g} kg, "
                f"F_a {grid.base.F_a:.4g} -> {changes['F_a']:.4g} N"
            )
        else:
            changes[name] = value
    return grid.base.replace(**changes)


def sweep(
    grid: SweepGrid,
    motor_source: MotorSweepSource | None = None,
    verbose: bool = False,
) -> SweepTable:
    """Evaluate the total impulse on every grid point.

    Points whose parameters are not physical (for example a motor that cannot
    be scaled) are kept as infeasible rows.

    Args:
        grid: Axes and base parameters.
        motor_source: Required when an axis is the motor radius ``r``.
        verbose: Show a progress bar.

    Returns:
        SweepTable: Rows in grid order, first axis outermost.
    """
    if any(axis.name == "r" for axis in grid.axes) and motor_source is None:
        raise ReflexDomainError("a motor-radius sweep needs a reference motor and scaling law")

    def evaluate(point: dict[str, float]) -> SweepRow:
        try:
            params = _params_at(grid, point, motor_source)
            return SweepRow(point, params, total_impulse(params))
        except ReflexDomainError as e:
            logger.warning(f"Sweep point {point} is infeasible: {e}")
            return SweepRow(point, None, None, reason=str(e))

    points = grid.points()
    logger.info(f"Sweeping {' x '.join(a.name for a in grid.axes)} over {len(points)} points")
    table = SweepTable(grid.axes, ordered_map(evaluate, points, desc="sweep", verbose=verbose))
    best = table.argmin
    if best is None:
        logger.warning("No feasible point in the sweep")
    else:
        logger.info(f"Minimum impulse {table.rows[best].breakdown.total:.6g} N·s at {table.rows[best].point}")  # type: ignore[union-attr]
    return table
