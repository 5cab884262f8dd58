"""Planar two-link manipulator: transparency metrics and reflex surfaces.

The joints are series-elastic: each joint has a link side (structure inertia)
and a motor side (reflected rotor inertia) coupled by the joint stiffness.
A contact along a direction ``u`` is reduced to the 1D collision model by
projecting the inertias, stiffness and torque limits onto ``u``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import NDArray

from .errors import (
    LockedDirection,
    ReflexDomainError,
    SingularConfiguration,
    require_non_negative,
    require_positive,
)
from .parallel import ordered_map
from .reflex import CollisionParams1D, ForceThreshold, PhaseBreakdown, total_impulse
from .scaling import MotorSpec, builtin_motors

logger = logging.getLogger(__name__)

Matrix = NDArray[np.float64]
InertiaSelector = Literal["structure", "actuators", "full"]
SaturationMode = Literal["scaled", "literal"]

#: |det J| at or below SINGULARITY_TOL * l1 * l2 is treated as singular.
SINGULARITY_TOL = 1e-9
#: Relative mobility below which a direction counts as locked.
LOCKED_TOL = 1e-12
DEFAULT_CONTACT_STIFFNESS = 2e7


@dataclass(frozen=True)
class LinkInertia:
    mass: float
    com: float
    inertia_com: float = 0.0

    def __post_init__(self) -> None:
        require_non_negative(mass=self.mass, com=self.com, inertia_com=self.inertia_com)

    @classmethod
    def slender_rod(cls, mass: float, length: float) -> LinkInertia:
        return cls(mass=mass, com=length / 2.0, inertia_com=mass * length**2 / 12.0)

    @classmethod
    def point_mass(cls, mass: float, at: float) -> LinkInertia:
        return cls(mass=mass, com=at, inertia_com=0.0)

    @property
    def inertia_joint(self) -> float:
        """Rotary inertia about the proximal joint."""
        return self.inertia_com + self.mass * self.com**2


@dataclass(frozen=True)
class TwoLinkModel:
    """Planar 2R arm with series-elastic joints.

    ``M_jj``, ``K`` and ``tau_max`` hold one entry per joint. ``k_m`` is the
    mechanical contact stiffness used during the reaction phase.
    """

    l1: float
    l2: float
    link1: LinkInertia
    link2: LinkInertia
    M_jj: tuple[float, float]
    K: tuple[float, float] = (100.0, 100.0)
    tau_max: tuple[float, float] = (1.3, 1.3)
    k_m: float = DEFAULT_CONTACT_STIFFNESS

    def __post_init__(self) -> None:
        require_positive(l1=self.l1, l2=self.l2, k_m=self.k_m)
        for i in range(2):
            require_positive(**{f"M_jj[{i}]": self.M_jj[i], f"K[{i}]": self.K[i], f"tau_max[{i}]": self.tau_max[i]})

    @classmethod
    def from_motor(
        cls,
        motor: MotorSpec | None = None,
        l1: float = 0.15,
        l2: float = 0.15,
        link_mass: float = 0.2,
        K: tuple[float, float] = (100.0, 100.0),
        k_m: float = DEFAULT_CONTACT_STIFFNESS,
    ) -> TwoLinkModel:
        """Slender-rod links with the same motor at both joints."""
        motor = motor or builtin_motors()["M2"]
        return cls(
            l1=l1,
            l2=l2,
            link1=LinkInertia.slender_rod(link_mass, l1),
            link2=LinkInertia.slender_rod(link_mass, l2),
            M_jj=(motor.J_reflected, motor.J_reflected),
            K=K,
            tau_max=(motor.tau_out, motor.tau_out),
            k_m=k_m,
        )


@dataclass(frozen=True)
class Configuration:
    q1: float
    q2: float
    # Joint rates are carried for trace replay only.
    dq1: float = 0.0
    dq2: float = 0.0

    def __post_init__(self) -> None:
        for name in ("q1", "q2", "dq1", "dq2"):
            if not math.isfinite(getattr(self, name)):
                raise ReflexDomainError(f"{name} must be finite")

    @classmethod
    def from_degrees(cls, q1: float, q2: float) -> Configuration:
        return cls(math.radians(q1), math.radians(q2))


@dataclass(frozen=True)
class ContactSpec:
    u: tuple[float, float]
    v_0: float
    F_s: float

    def __post_init__(self) -> None:
        require_positive(v_0=self.v_0, F_s=self.F_s)
        if abs(math.hypot(*self.u) - 1.0) > 1e-12:
            raise ReflexDomainError(f"collision direction must be a unit vector, got {self.u}")

    @classmethod
    def from_angle(cls, theta: float, v_0: float, F_s: float) -> ContactSpec:
        return cls((math.cos(theta), math.sin(theta)), v_0, F_s)


def forward_kinematics(model: TwoLinkModel, q: Configuration) -> tuple[Matrix, Matrix]:
    """Positions of joint 2 and of the end effector."""
    elbow = model.l1 * np.array([math.cos(q.q1), math.sin(q.q1)])
    q12 = q.q1 + q.q2
    tip = elbow + model.l2 * np.array([math.cos(q12), math.sin(q12)])
    return elbow, tip


def mass_matrix(model: TwoLinkModel, q: Configuration) -> Matrix:
    """Link-side (structure) inertia ``M_bb``."""
    i1 = model.link1.inertia_joint
    i2 = model.link2.inertia_joint
    coupling = model.link2.mass * model.l1 * model.link2.com * math.cos(q.q2)
    m11 = i1 + i2 + model.link2.mass * model.l1**2 + 2.0 * coupling
    m12 = i2 + coupling
    return np.array([[m11, m12], [m12, i2]])


def actuator_inertia(model: TwoLinkModel) -> Matrix:
    return np.diag(np.asarray(model.M_jj, dtype=float))


def full_inertia(model: TwoLinkModel, q: Configuration) -> Matrix:
    """Inertia with the transmissions locked: structure plus reflected rotors."""
    return mass_matrix(model, q) + actuator_inertia(model)


def partitioned_mass_matrix(model: TwoLinkModel, q: Configuration) -> Matrix:
    """4x4 inertia in (link angle, spring deflection) coordinates."""
    locked = full_inertia(model, q)
    rotor = actuator_inertia(model)
    return np.block([[locked, rotor], [rotor, rotor]])


def free_inertia(model: TwoLinkModel, q: Configuration) -> Matrix:
    """Link inertia seen by an impact when the joint springs are free to deflect."""
    P = partitioned_mass_matrix(model, q)
    A, B, C = P[:2, :2], P[:2, 2:], P[2:, 2:]
    return A - B @ np.linalg.solve(C, B.T)


def jacobian(model: TwoLinkModel, q: Configuration) -> Matrix:
    s1, c1 = math.sin(q.q1), math.cos(q.q1)
    s12, c12 = math.sin(q.q1 + q.q2), math.cos(q.q1 + q.q2)
    return np.array(
        [
            [-model.l1 * s1 - model.l2 * s12, -model.l2 * s12],
            [model.l1 * c1 + model.l2 * c12, model.l2 * c12],
        ]
    )


def _nonsingular_jacobian(model: TwoLinkModel, q: Configuration) -> Matrix:
    J = jacobian(model, q)
    det = float(np.linalg.det(J))
    if abs(det) <= SINGULARITY_TOL * model.l1 * model.l2:
        raise SingularConfiguration(
            f"Jacobian is singular at q=({q.q1:.6g}, {q.q2:.6g}) rad, det={det:.3g}", det=det
        )
    return J


def _congruence(J: Matrix, M: Matrix) -> Matrix:
    """``J^-T M J^-1``, symmetrized."""
    Jinv = np.linalg.inv(J)
    out = Jinv.T @ M @ Jinv
    return (out + out.T) / 2.0


def gie(model: TwoLinkModel, q: Configuration) -> Matrix:
    """Generalized inertia ellipsoid ``Lambda_0`` of the locked arm."""
    J = _nonsingular_jacobian(model, q)
    return _congruence(J, full_inertia(model, q))


def dme(model: TwoLinkModel, q: Configuration) -> Matrix:
    """Dynamic manipulability ellipsoid ``J (M^T M)^-1 J^T``."""
    J = jacobian(model, q)
    M = full_inertia(model, q)
    out = J @ np.linalg.solve(M.T @ M, J.T)
    return (out + out.T) / 2.0


def gyration_ellipsoid(model: TwoLinkModel, q: Configuration) -> Matrix:
    """``Lambda_0^-1 = J M^-1 J^T``; defined at singular configurations too."""
    J = jacobian(model, q)
    out = J @ np.linalg.solve(full_inertia(model, q), J.T)
    return (out + out.T) / 2.0


def ellipsoid_axes(matrix: Matrix) -> tuple[Matrix, Matrix]:
    """Semi-axis lengths and unit directions (columns) of a symmetric PSD matrix.

    Lengths are the square roots of the eigenvalues, in ascending order.
    """
    eigenvalues, vectors = np.linalg.eigh(matrix)
    return np.sqrt(np.clip(eigenvalues, 0.0, None)), vectors


def _selected_inertia(model: TwoLinkModel, q: Configuration, selector: InertiaSelector) -> Matrix:
    if selector == "structure":
        return mass_matrix(model, q)
    if selector == "actuators":
        return actuator_inertia(model)
    if selector == "full":
        return full_inertia(model, q)
    raise ReflexDomainError(f"unknown inertia selector {selector!r}")


def effective_mass(
    model: TwoLinkModel,
    q: Configuration,
    u: tuple[float, float] | Matrix,
    inertia_selector: InertiaSelector = "full",
) -> float:
    """Effective mass along ``u``: ``(u^T J M^-1 J^T u)^-1``.

    Never inverts ``J``. Returns ``math.inf`` when the direction is locked
    (its mobility is negligible next to the largest one).
    """
    J = jacobian(model, q)
    M = _selected_inertia(model, q, inertia_selector)
    w = J.T @ np.asarray(u, dtype=float)
    try:
        mobility_matrix = J @ np.linalg.solve(M, J.T)
    except np.linalg.LinAlgError as e:
        raise ReflexDomainError(f"{inertia_selector} inertia is singular") from e
    mobility = float(w @ np.linalg.solve(M, w))
    if mobility <= LOCKED_TOL * float(np.trace(mobility_matrix)):
        return math.inf
    return 1.0 / mobility


def task_stiffness_matrix(model: TwoLinkModel, q: Configuration) -> Matrix:
    J = _nonsingular_jacobian(model, q)
    return _congruence(J, np.diag(np.asarray(model.K, dtype=float)))


def task_stiffness(model: TwoLinkModel, q: Configuration, u: tuple[float, float] | Matrix) -> float:
    """Joint stiffness projected onto ``u``, N/m."""
    J = _nonsingular_jacobian(model, q)
    w = np.linalg.solve(J, np.asarray(u, dtype=float))
    return float(w @ np.diag(np.asarray(model.K, dtype=float)) @ w)


def max_task_force(model: TwoLinkModel, q: Configuration, u: tuple[float, float] | Matrix) -> float:
    """Largest force along ``u`` whose joint torques stay within ``tau_max``."""
    J = _nonsingular_jacobian(model, q)
    w = np.abs(J.T @ np.asarray(u, dtype=float))
    limits = np.asarray(model.tau_max, dtype=float)
    # A joint that sees no torque does not constrain the force.
    active = w > 1e-15 * max(float(w.max()), 1e-300)
    return float(np.min(limits[active] / w[active]))


def task_acceleration(
    model: TwoLinkModel,
    q: Configuration,
    u: tuple[float, float] | Matrix,
    m_r: float,
    mode: SaturationMode = "scaled",
) -> float:
    """Retraction acceleration along ``u`` with saturated joint torques, m/s².

    ``scaled`` scales the whole torque vector down until every joint is within
    its limit. ``literal`` clips ``J^T u`` joint by joint and maps it back.
    """
    require_positive(m_r=m_r)
    if mode == "scaled":
        return max_task_force(model, q, u) / m_r
    if mode == "literal":
        J = _nonsingular_jacobian(model, q)
        u_arr = np.asarray(u, dtype=float)
        limits = np.asarray(model.tau_max, dtype=float)
        clipped = np.clip(J.T @ u_arr, -limits, limits)
        return float(u_arr @ np.linalg.solve(J.T, clipped)) / m_r
    raise ReflexDomainError(f"unknown saturation mode {mode!r}")


def imf(model: TwoLinkModel, q: Configuration) -> float:
    """Impact mitigation factor ``det(I - Lambda Lambda_l^-1)`` in [0, 1].

    ``Lambda`` is the task inertia with free joint springs, ``Lambda_l`` with
    the springs locked. Tends to zero as the rotor inertia vanishes and to one
    as the link inertia vanishes next to it.
    """
    J = _nonsingular_jacobian(model, q)
    P = partitioned_mass_matrix(model, q)
    B, C = P[:2, 2:], P[2:, 2:]
    locked = _congruence(J, P[:2, :2])
    # Lambda_l - Lambda
    decoupled = _congruence(J, B @ np.linalg.solve(C, B.T))
    value = float(np.linalg.det(decoupled) / np.linalg.det(locked))
    return min(1.0, max(0.0, value))


def reduce_to_1d(
    model: TwoLinkModel,
    q: Configuration,
    contact: ContactSpec,
    series_with_contact: bool = False,
    saturation: SaturationMode = "scaled",
) -> CollisionParams1D:
    """Equivalent 1D collision for a contact along ``contact.u``.

    The joint stiffness projects to the sensing spring. With
    ``series_with_contact`` it is additionally put in series with ``k_m``.
    """
    _nonsingular_jacobian(model, q)
    m_f = effective_mass(model, q, contact.u, "structure")
    m_r = effective_mass(model, q, contact.u, "actuators")
    if math.isinf(m_f) or math.isinf(m_r):
        raise LockedDirection(f"direction {contact.u} is locked at q=({q.q1:.6g}, {q.q2:.6g})")
    k_task = task_stiffness(model, q, contact.u)
    F_a = m_r * task_acceleration(model, q, contact.u, m_r, mode=saturation)
    return CollisionParams1D(
        m_f=m_f,
        m_r=m_r,
        k_m=model.k_m,
        k_s=k_task,
        sensing=ForceThreshold(contact.F_s),
        v_0=contact.v_0,
        F_a=F_a,
        sensing_stiffness=None if series_with_contact else k_task,
    )


@dataclass(frozen=True)
class SurfacePoint:
    theta: float
    u: tuple[float, float]
    params: CollisionParams1D | None
    breakdown: PhaseBreakdown | None
    flag: str = ""

    @property
    def total(self) -> float:
        if self.breakdown is None:
            return math.inf
        return self.breakdown.total


SURFACE_COLUMNS = (
    "theta_rad", "ux", "uy", "m_f_kg", "m_r_kg", "k_npm", "f_a_n",
    "t1_s", "i1_ns", "i2_ns", "i3_ns", "total_ns", "flag",
)


@dataclass(frozen=True)
class ReflexSurface:
    points: list[SurfacePoint] = field(default_factory=list)

    @property
    def thetas(self) -> Matrix:
        return np.array([p.theta for p in self.points])

    @property
    def totals(self) -> Matrix:
        return np.array([p.total for p in self.points])

    def records(self) -> list[list[float | str]]:
        rows: list[list[float | str]] = []
        for pt in self.points:
            p, b = pt.params, pt.breakdown
            nan = math.nan
            rows.append([
                pt.theta, pt.u[0], pt.u[1],
                p.m_f if p else nan, p.m_r if p else nan,
                p.k if p else nan, p.F_a if p else nan,
                b.t1 if b else nan, b.i_plastic if b else nan,
                b.i_sensing if b else nan, b.i_reaction if b else nan,
                b.total if b else math.inf, pt.flag,
            ])
        return rows


def reflex_surface(
    model: TwoLinkModel,
    q: Configuration,
    v_0: float,
    F_s: float,
    n: int = 360,
    series_with_contact: bool = False,
    saturation: SaturationMode = "scaled",
    verbose: bool = False,
) -> ReflexSurface:
    """Total impulse for ``n`` collision directions spread over a full turn.

    Every direction is reduced on its own. Directions where the reduction is
    undefined keep an infinite total and are flagged ``singular``, ``locked``
    or, for any other domain error, ``degenerate``.
    """
    if n < 8:
        raise ReflexDomainError(f"a reflex surface needs at least 8 directions, got {n}")
    require_positive(v_0=v_0, F_s=F_s)
    thetas = [2.0 * math.pi * j / n for j in range(n)]

    def evaluate(theta: float) -> SurfacePoint:
        contact = ContactSpec.from_angle(theta, v_0, F_s)
        try:
            params = reduce_to_1d(model, q, contact, series_with_contact, saturation)
            breakdown = total_impulse(params)
        except SingularConfiguration:
            return SurfacePoint(theta, contact.u, None, None, "singular")
        except LockedDirection:
            return SurfacePoint(theta, contact.u, None, None, "locked")
        except ReflexDomainError as e:
            logger.debug(f"theta={theta:.4g}: {e}")
            return SurfacePoint(theta, contact.u, None, None, "degenerate")
        return SurfacePoint(theta, contact.u, params, breakdown)

    logger.info(f"Computing reflex surface with {n} directions at q=({q.q1:.4g}, {q.q2:.4g})")
    points = ordered_map(evaluate, thetas, desc="surface", verbose=verbose)
    flagged = sum(1 for p in points if p.flag)
    if flagged:
        logger.warning(f"{flagged} of {n} surface directions are flagged")
    return ReflexSurface(points)
