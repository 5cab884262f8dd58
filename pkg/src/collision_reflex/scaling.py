"""Motor and gearbox scaling laws, motor synthesis and gear-ratio selection."""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Any

from .errors import ReflexDomainError, require_positive

logger = logging.getLogger(__name__)

#: Characteristic contact radius of the desk-scale finger, m.
DEFAULT_LINK_LENGTH = 0.1143


@dataclass(frozen=True)
class PowerLaw:
    """Exponents of ``l**l * r**r * N**N * stages**stages``."""

    l: float = 0.0  # noqa: E741
    r: float = 0.0
    N: float = 0.0
    stages: float = 0.0

    def __str__(self) -> str:
        parts = []
        for symbol, exponent in (("l", self.l), ("r", self.r), ("N", self.N), ("a", self.stages)):
            if exponent == 0:
                continue
            parts.append(symbol if exponent == 1 else f"{symbol}^{exponent:g}")
        return "".join(parts) or "1"


@dataclass(frozen=True)
class ScalingLaw:
    name: str
    slug: str
    category: str  # "motor" or "gearbox"
    mass: PowerLaw
    inertia: PowerLaw
    torque: PowerLaw

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "slug": self.slug,
            "category": self.category,
            "mass": str(self.mass),
            "inertia": str(self.inertia),
            "torque": str(self.torque),
        }


_LAWS: tuple[ScalingLaw, ...] = (
    ScalingLaw("Isometric", "isometric", "motor",
               PowerLaw(l=1, r=2), PowerLaw(l=1, r=4, N=2), PowerLaw(l=1, r=4)),
    # Torque exponent presumes isometric mass and inertia.
    ScalingLaw("Empirical", "empirical", "motor",
               PowerLaw(l=1, r=2), PowerLaw(l=1, r=4, N=2), PowerLaw(l=1, r=2.8)),
    ScalingLaw("Quadruped design", "quadruped", "motor",
               PowerLaw(l=1, r=1), PowerLaw(l=1, r=3, N=2), PowerLaw(l=1, r=2)),
    ScalingLaw("w/ electrical & thermal", "electrical-thermal", "motor",
               PowerLaw(l=1, r=2), PowerLaw(l=1, r=4, N=2), PowerLaw(l=1, r=2.5)),
    ScalingLaw("Parallel shaft", "parallel-shaft", "gearbox",
               PowerLaw(l=1, r=2), PowerLaw(l=1, r=4, N=2, stages=-1),
               PowerLaw(l=1, r=2, stages=-1)),
    ScalingLaw("Planetary", "planetary", "gearbox",
               PowerLaw(l=1, r=2), PowerLaw(l=1, r=4, N=2, stages=-1),
               PowerLaw(l=1, r=2, stages=-1)),
    ScalingLaw("Harmonic drive", "harmonic", "gearbox",
               PowerLaw(l=1, r=2), PowerLaw(l=1, r=4, N=2), PowerLaw(r=3)),
    ScalingLaw("Cycloidal drive", "cycloidal", "gearbox",
               PowerLaw(l=1, r=2), PowerLaw(l=1, r=4, N=2), PowerLaw(l=-1, r=4)),
    ScalingLaw("Ball screw", "ball-screw", "gearbox",
               PowerLaw(l=1, r=2), PowerLaw(l=1, r=4), PowerLaw(r=3)),
)

DEFAULT_LAW = "electrical-thermal"


def builtin_laws() -> list[ScalingLaw]:
    """All motor and gearbox scaling laws, motors first."""
    return list(_LAWS)


def law_by_name(name: str) -> ScalingLaw:
    """Look a law up by slug or display name (case-insensitive)."""
    key = name.strip().lower()
    for law in _LAWS:
        if key in (law.slug, law.name.lower()):
            return law
    known = ", ".join(law.slug for law in _LAWS)
    raise ReflexDomainError(f"unknown scaling law {name!r}; known: {known}")


def inertia_torque_exponent(law: ScalingLaw, isometric: bool = False) -> float:
    """Exponent ``e`` of ``J_m ~ tau**e`` obtained by eliminating the radius.

    Args:
        law: A motor scaling law.
        isometric: If True the stack length scales with the radius too;
            otherwise the length is held fixed.
    """
    inertia_r = law.inertia.r + (law.inertia.l if isometric else 0.0)
    torque_r = law.torque.r + (law.torque.l if isometric else 0.0)
    if torque_r == 0:
        raise ReflexDomainError(f"torque of {law.name!r} does not depend on size")
    return inertia_r / torque_r


@dataclass(frozen=True)
class MotorSpec:
    """Frameless motor, optionally behind an ideal transmission.

    ``r`` is the stator outer diameter used as the scaling variable; only
    ratios of it matter.
    """

    r: float
    l: float  # noqa: E741
    J_m: float
    tau_c: float
    tau_p: float
    N: float = 1.0
    name: str = field(default="motor", compare=False)

    def __post_init__(self) -> None:
        require_positive(r=self.r, l=self.l, J_m=self.J_m, tau_c=self.tau_c, tau_p=self.tau_p)
        if not (1.0 <= self.N < math.inf):
            raise ReflexDomainError(f"gear ratio N must be >= 1, got {self.N!r}")
        if self.tau_p < self.tau_c:
            raise ReflexDomainError(
                f"peak torque {self.tau_p} is below continuous torque {self.tau_c}"
            )

    @property
    def J_reflected(self) -> float:
        return self.N**2 * self.J_m

    @property
    def tau_out(self) -> float:
        """Peak torque at the transmission output, N·m."""
        return self.N * self.tau_p

    def to_dict(self, derived: bool = False) -> dict[str, Any]:
        data: dict[str, Any] = {
            "name": self.name,
            "r": self.r,
            "l": self.l,
            "J_m": self.J_m,
            "tau_c": self.tau_c,
            "tau_p": self.tau_p,
            "N": self.N,
        }
        if derived:
            data["J_reflected"] = self.J_reflected
            data["tau_out"] = self.tau_out
        return data


def builtin_motors() -> dict[str, MotorSpec]:
    """Table values of a 60 mm frameless motor (M2) and its scaled siblings."""
    return {
        "M1": MotorSpec(r=0.010, l=0.0125, J_m=1.71e-8, tau_c=5.94e-3, tau_p=1.47e-2,
                        N=88.18, name="M1"),
        "M2": MotorSpec(r=0.060, l=0.0125, J_m=2.21e-5, tau_c=0.524, tau_p=1.3, name="M2"),
        "M3": MotorSpec(r=0.100, l=0.0125, J_m=1.71e-4, tau_c=1.879, tau_p=4.661, name="M3"),
    }


def scale_motor(
    reference: MotorSpec, r_new: float, law: ScalingLaw, torque_floor: float
) -> MotorSpec:
    """Scale a direct-drive reference motor to a new radius at constant length.

    A transmission is added when the scaled motor cannot reach
    ``torque_floor`` on its own: ``N = max(1, torque_floor / tau_p)``.

    Args:
        reference: Motor to scale; must be direct drive (``N == 1``).
        r_new: New stator diameter, m.
        law: Motor scaling law providing the radius exponents.
        torque_floor: Minimum output peak torque, N·m.

    Returns:
        MotorSpec: The scaled motor with its gear ratio.
    """
    require_positive(r_new=r_new, torque_floor=torque_floor)
    if reference.N != 1:
        raise ReflexDomainError(f"reference motor must be direct drive, has N={reference.N}")
    if law.category != "motor":
        raise ReflexDomainError(f"{law.name!r} is a gearbox law and cannot scale a motor")

    rho = r_new / reference.r
    try:
        J_m = reference.J_m * rho**law.inertia.r
        tau_c = reference.tau_c * rho**law.torque.r
        tau_p = reference.tau_p * rho**law.torque.r
    except OverflowError as e:
        raise ReflexDomainError(f"scaling to r={r_new} overflows") from e
    for label, value in (("J_m", J_m), ("tau_c", tau_c), ("tau_p", tau_p)):
        if not (0 < value < math.inf):
            raise ReflexDomainError(f"scaled {label} is not finite and positive: {value!r}")

    N = max(1.0, torque_floor / tau_p)
    scaled = dataclasses.replace(
        reference,
        r=r_new,
        J_m=J_m,
        tau_c=tau_c,
        tau_p=tau_p,
        N=N,
        name=f"{reference.name}@{r_new * 1e3:g}mm",
    )
    logger.info(
        f"Scaled {reference.name} to r={r_new * 1e3:g} mm: J_m={J_m:.4g}, "
        f"tau_p={tau_p:.4g}, N={N:.4g}"
    )
    return scaled


def reflected_mass_at_link(motor: MotorSpec, link_length: float) -> float:
    """Translational mass equivalent of the reflected inertia at ``link_length``."""
    require_positive(link_length=link_length)
    return motor.J_reflected / link_length**2


def force_capability_at_link(motor: MotorSpec, link_length: float) -> float:
    """Peak force available at ``link_length`` from the output torque."""
    require_positive(link_length=link_length)
    return motor.tau_out / link_length


@dataclass(frozen=True)
class MotorSweepSource:
    """Maps a motor radius to the 1D collision quantities it implies.

    The reflected motor mass is added to the finger mass of a collision and
    is the whole of its robot mass.
    """

    reference: MotorSpec
    law: ScalingLaw
    torque_floor: float
    link_length: float = DEFAULT_LINK_LENGTH

    def __post_init__(self) -> None:
        require_positive(torque_floor=self.torque_floor, link_length=self.link_length)

    def motor_at(self, r: float) -> MotorSpec:
        return scale_motor(self.reference, r, self.law, self.torque_floor)

    def collision_terms(self, r: float) -> dict[str, float]:
        """Reflected mass and force capability for a motor of diameter ``r``."""
        motor = self.motor_at(r)
        return {
            "m_reflected": reflected_mass_at_link(motor, self.link_length),
            "F_a": force_capability_at_link(motor, self.link_length),
        }
