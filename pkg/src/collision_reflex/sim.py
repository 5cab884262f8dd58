"""Time-stepping oracle for the 1D collision.

The finger and robot masses approach a rigid constraint at ``v_0``. At
contact the finger loses its momentum (instantaneously or as a half-sine
pulse), the robot keeps ``v_0`` and compresses the lumped spring until the
spring force reaches the threshold. After detection the software spring is
dropped and the robot retracts with constant acceleration until the contact
force vanishes. States are advanced with fixed-step RK4; detection and
release are located inside the step and the step is split there.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .errors import ReflexDomainError, SimulationHorizonError, require_non_negative, require_positive
from .forcetrace import ForceTrace
from .parallel import ordered_map
from .reflex import CollisionParams1D, ForceThreshold, PhaseBreakdown, total_impulse

logger = logging.getLogger(__name__)

SPIKE_MODELS = ("instantaneous", "half-sine")
#: Minimum number of knots across a half-sine spike.
SPIKE_KNOTS = 32
#: Events closer than this fraction of a step to a knot reuse the knot.
KNOT_MERGE = 1e-3

State = tuple[float, float, float]  # spring compression, robot velocity, finger velocity
Derivative = Callable[[float, State], State]


@dataclass(frozen=True)
class SimOptions:
    dt: float = 1e-5
    t_max: float = 2.0
    spike_model: str = "half-sine"
    k_c: float = 2e7
    noise_sigma: float = 0.0
    seed: int = 0
    latency: float = 0.0
    # Quiet windows before contact and after release.
    t_pre: float = 0.02
    t_post: float = 0.02

    def __post_init__(self) -> None:
        require_positive(dt=self.dt, t_max=self.t_max, k_c=self.k_c)
        require_non_negative(
            noise_sigma=self.noise_sigma, latency=self.latency, t_post=self.t_post
        )
        if self.spike_model not in SPIKE_MODELS:
            raise ReflexDomainError(
                f"spike_model must be one of {', '.join(SPIKE_MODELS)}, got {self.spike_model!r}"
            )
        if not self.dt <= self.t_pre < math.inf:
            raise ReflexDomainError(f"t_pre must cover at least one step, got {self.t_pre!r}")


@dataclass(frozen=True)
class SimEvents:
    """Absolute trace times of the collision events, s."""

    contact: float
    spike_end: float
    detection: float
    release: float


@dataclass(frozen=True, eq=False)
class SimResult:
    trace: ForceTrace
    events: SimEvents
    breakdown: PhaseBreakdown
    # Finger velocity left after the spike; zero for a fully plastic impact.
    finger_velocity: float = 0.0


def _axpy(y: State, h: float, k: State) -> State:
    return (y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2])


def rk4_step(f: Derivative, t: float, y: State, h: float) -> State:
    """Classical fourth-order Runge–Kutta step."""
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, _axpy(y, 0.5 * h, k1))
    k3 = f(t + 0.5 * h, _axpy(y, 0.5 * h, k2))
    k4 = f(t + h, _axpy(y, h, k3))
    return (
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        y[2] + h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
    )


class _Collision:
    """Stepping state of one simulation run.

    ``phase`` walks through sensing, latency (only with a non-zero latency),
    reaction and released. Knots are recorded on a grid aligned to the
    contact time, plus one knot per event and the spike substeps.
    """

    def __init__(self, p: CollisionParams1D, opt: SimOptions) -> None:
        self.p = p
        self.opt = opt
        self.k = p.k
        self.F_s = p.F_s
        self.n_pre = max(1, round(opt.t_pre / opt.dt))
        self.t_contact = self.n_pre * opt.dt
        if opt.spike_model == "half-sine":
            self.omega = math.sqrt(opt.k_c / p.m_f)
            self.spike_duration = math.pi / self.omega
            self.spike_amplitude = p.m_f * p.v_0 * self.omega / 2.0
        else:
            self.omega = 0.0
            self.spike_duration = 0.0
            self.spike_amplitude = 0.0
        self.phase = "sensing"
        self.t_detect = math.nan
        self.t_switch = math.nan
        self.t_release = math.nan
        self.t: list[float] = []
        self.force: list[float] = []
        self.idx: dict[str, int] = {}

    def spike(self, t: float) -> float:
        tau = t - self.t_contact
        if 0.0 <= tau <= self.spike_duration:
            return self.spike_amplitude * math.sin(self.omega * tau)
        return 0.0

    def derivative(self, t: float, y: State) -> State:
        if self.phase == "reaction":
            return (y[1], -self.p.a, 0.0)
        return (y[1], 0.0, -self.spike(t) / self.p.m_f)

    def contact_force(self, t: float, y: State) -> float:
        if self.phase == "reaction":
            return self.p.k_m * y[0]
        return self.k * y[0] + self.spike(t)

    def event_value(self, y: State) -> float:
        """Changes sign at the next event of the current phase."""
        if self.phase == "sensing":
            return self.k * y[0] - self.F_s
        return y[0]

    def knot(self, t: float, force: float, label: str | None = None) -> None:
        if self.t and t - self.t[-1] < KNOT_MERGE * self.opt.dt:
            self.force[-1] = force
        else:
            self.t.append(t)
            self.force.append(force)
        if label:
            self.idx[label] = len(self.t) - 1

    def partial_trace(self) -> ForceTrace:
        return ForceTrace(
            np.array(self.t), np.array(self.force), source="sim:partial", sample_rate=1.0 / self.opt.dt
        )

    def locate(self, s: float, y: State, h: float, y_end: State) -> tuple[float, State] | None:
        """Find the event inside ``[s, s + h]`` by regula falsi on the step length."""
        if self.phase not in ("sensing", "reaction"):
            return None
        g_lo, g_hi = self.event_value(y), self.event_value(y_end)
        if (g_lo < 0) == (g_hi < 0):
            return None
        lo, hi = 0.0, h
        frac, y_mid = hi, y_end
        for _ in range(8):
            frac = lo + (hi - lo) * g_lo / (g_lo - g_hi)
            y_mid = rk4_step(self.derivative, s, y, frac)
            g_mid = self.event_value(y_mid)
            if g_mid == 0.0:
                break
            if (g_mid < 0) == (g_lo < 0):
                lo, g_lo = frac, g_mid
            else:
                hi, g_hi = frac, g_mid
        return frac, y_mid

    def switch(self, s: float, y: State) -> State:
        """Drop the software spring; the contact force stays continuous."""
        force = self.k * y[0]
        self.phase = "reaction"
        self.knot(s, force, "switch")
        logger.debug(f"Reaction starts at t={s:.6g} s with F={force:.4g} N")
        return (force / self.p.k_m, 0.0, y[2])

    def on_event(self, s: float, y: State) -> State:
        if self.phase == "sensing":
            self.t_detect = s
            self.knot(s, self.contact_force(s, y), "detection")
            self.t_switch = s + self.opt.latency
            if self.opt.latency > 0:
                self.phase = "latency"
                return y
            return self.switch(s, y)
        self.t_release = s
        self.knot(s, 0.0, "release")
        self.phase = "released"
        return y

    def run(self) -> float:
        """Step until release; returns the finger velocity after the spike."""
        opt, p = self.opt, self.p
        dt = opt.dt
        for j in range(self.n_pre):
            self.knot(j * dt, 0.0)
        y: State = (0.0, p.v_0, p.v_0)
        if opt.spike_model == "instantaneous":
            # Trapezoid area of the contact knot over its two neighbours is m_f * v_0.
            self.knot(self.t_contact, p.m_f * p.v_0 / dt, "contact")
            y = (0.0, p.v_0, 0.0)
        else:
            self.knot(self.t_contact, 0.0, "contact")
        spike_end = self.t_contact + self.spike_duration
        substep = self.spike_duration / SPIKE_KNOTS
        finger_velocity = y[2]

        s = self.t_contact
        j = 0
        while self.phase != "released":
            j += 1
            t_next = self.t_contact + j * dt
            if t_next > opt.t_max:
                raise SimulationHorizonError(
                    f"collision not released before t_max={opt.t_max} s "
                    f"(phase {self.phase}, force {self.force[-1]:.4g} N)",
                    partial=self.partial_trace(),
                )
            while self.phase != "released" and t_next - s >= KNOT_MERGE * dt:
                e = t_next
                if s < spike_end:
                    e = min(e, spike_end, s + substep)
                if self.phase == "latency":
                    e = min(e, self.t_switch)
                if t_next - e < KNOT_MERGE * dt:
                    e = t_next
                y_end = rk4_step(self.derivative, s, y, e - s)
                hit = self.locate(s, y, e - s, y_end)
                if hit is not None:
                    frac, y = hit
                    s += frac
                    y = self.on_event(s, y)
                    continue
                y, s = y_end, e
                if self.phase == "latency" and s >= self.t_switch - KNOT_MERGE * dt:
                    y = self.switch(s, y)
                    continue
                self.knot(s, self.contact_force(s, y))
                if self.spike_duration and "spike_end" not in self.idx and s >= spike_end - KNOT_MERGE * dt:
                    self.idx["spike_end"] = len(self.t) - 1
                    finger_velocity = y[2]
            s = max(s, t_next)

        if "spike_end" not in self.idx:
            # An instantaneous spike ends one step after contact.
            self.idx["spike_end"] = min(self.idx["contact"] + 1, self.idx["detection"])
        k = math.floor((self.t_release - self.t_contact) / dt) + 1
        while self.t_contact + k * dt <= self.t_release + opt.t_post:
            self.knot(self.t_contact + k * dt, 0.0)
            k += 1
        return finger_velocity


def simulate(p: CollisionParams1D, opt: SimOptions | None = None) -> SimResult:
    """Simulate one collision and integrate the per-phase impulses.

    Args:
        p: Collision parameters.
        opt: Stepping and output options.

    Returns:
        SimResult: Trace (with event knots), event times and phase impulses.

    Raises:
        SimulationHorizonError: if the contact force has not returned to zero
            by ``opt.t_max``; the partial trace is attached.
    """
    opt = opt or SimOptions()
    run = _Collision(p, opt)
    finger_velocity = run.run()
    trace = ForceTrace(
        np.array(run.t), np.array(run.force), source=f"sim:{opt.spike_model}", sample_rate=1.0 / opt.dt
    ).with_noise(opt.noise_sigma, opt.seed)

    idx = run.idx
    start = idx["contact"] - 1 if opt.spike_model == "instantaneous" else idx["contact"]
    spike_end = min(idx["spike_end"], idx["detection"])

    def window(i: int, j: int) -> float:
        return float(trapezoid(trace.force[i:j + 1], trace.t[i:j + 1]))

    events = SimEvents(
        contact=run.t_contact,
        spike_end=float(trace.t[spike_end]),
        detection=run.t_detect,
        release=run.t_release,
    )
    breakdown = PhaseBreakdown.from_phases(
        window(start, spike_end),
        window(spike_end, idx["detection"]),
        window(idx["detection"], idx["release"]),
        run.t_detect - run.t_contact,
        run.t_release - run.t_contact,
    )
    logger.info(
        f"Simulated collision: t1={breakdown.t1:.6g} s, t2={breakdown.t2:.6g} s, "
        f"total={breakdown.total:.6g} N·s over {len(trace)} samples"
    )
    return SimResult(trace, events, breakdown, finger_velocity)


def simulated_impulse(p: CollisionParams1D, opt: SimOptions | None = None) -> PhaseBreakdown:
    return simulate(p, opt).breakdown


# Parameter ranges of randomized closed-form checks.
VALIDATION_RANGES: dict[str, tuple[float, float]] = {
    "m_f": (0.01, 1.0),
    "m_r": (0.1, 5.0),
    "k_m": (1e3, 1e4),
    "k_s": (100.0, 1000.0),
    "F_s": (1.0, 5.0),
    "v_0": (0.2, 2.0),
    "F_a": (5.0, 50.0),
}


def random_params(rng: np.random.Generator) -> CollisionParams1D:
    draw = {name: float(rng.uniform(lo, hi)) for name, (lo, hi) in VALIDATION_RANGES.items()}
    F_s = draw.pop("F_s")
    return CollisionParams1D(sensing=ForceThreshold(F_s), **draw)


@dataclass(frozen=True)
class ValidationRow:
    params: CollisionParams1D
    closed_form: float
    simulated: float

    @property
    def rel_error(self) -> float:
        return abs(self.simulated - self.closed_form) / self.closed_form


@dataclass(frozen=True)
class ValidationReport:
    rows: list[ValidationRow] = field(default_factory=list)
    tolerance: float = 0.02

    @property
    def max_rel_error(self) -> float:
        return max((row.rel_error for row in self.rows), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance

    def to_dict(self) -> dict[str, object]:
        return {
            "n": len(self.rows),
            "tolerance": self.tolerance,
            "max_rel_error": self.max_rel_error,
            "passed": self.passed,
        }


def validate_batch(
    n: int = 100,
    seed: int = 0,
    opt: SimOptions | None = None,
    tolerance: float = 0.02,
    verbose: bool = False,
) -> ValidationReport:
    """Compare closed-form and simulated total impulse on random parameter sets."""
    if n < 1:
        raise ReflexDomainError(f"n must be >= 1, got {n}")
    opt = opt or SimOptions()
    rng = np.random.default_rng(seed)
    params = [random_params(rng) for _ in range(n)]

    def check(p: CollisionParams1D) -> ValidationRow:
        return ValidationRow(p, total_impulse(p).total, simulated_impulse(p, opt).total)

    report = ValidationReport(ordered_map(check, params, desc="validate", verbose=verbose), tolerance)
    logger.info(f"Validated {n} parameter sets: max relative error {report.max_rel_error:.3%}")
    if not report.passed:
        logger.warning(f"Closed form and oracle disagree by more than {tolerance:.1%}")
    return report
