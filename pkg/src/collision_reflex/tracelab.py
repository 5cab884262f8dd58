"""Force-trace laboratory: synthesis, integration, segmentation and fitting.

Measured or simulated contact-force traces are integrated to an impulse,
split into the plastic, sensing and reaction phases, and fitted with the
piecewise collision model to recover the finger mass, software stiffness,
detection threshold and reaction acceleration.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import trapezoid
from scipy.interpolate import PchipInterpolator
from scipy.ndimage import uniform_filter1d
from scipy.optimize import OptimizeWarning, curve_fit

from .errors import ReflexDomainError, SegmentationError, require_positive
from .forcetrace import HEADER, MIN_SAMPLES, ForceTrace, read_trace, write_trace
from .quadrature import gauss_kronrod
from .reflex import CollisionParams1D, PhaseBreakdown, combined_stiffness
from .sim import SimOptions, simulate

__all__ = [
    "HEADER",
    "MIN_SAMPLES",
    "ForceTrace",
    "FitResult",
    "TraceSegments",
    "fit_trace",
    "initial_estimate",
    "integrate_trace",
    "model_force",
    "noise_floor",
    "read_trace",
    "segment_trace",
    "synthesize_trace",
    "trace_breakdown",
    "write_trace",
]

logger = logging.getLogger(__name__)

INTEGRATION_METHODS = ("trapezoid", "gauss-kronrod")
#: Fraction of the trace treated as pre-contact for the noise floor.
PRE_CONTACT_FRACTION = 0.05
#: Contact episodes need this many consecutive samples above the floor.
MIN_EPISODE = 3
#: Largest moving-average window of the sustained-contact test, samples.
SUSTAIN_WINDOW = 25
#: Quiet gaps shorter than this fraction of the trace do not split a contact.
EPISODE_GAP_FRACTION = 0.05
#: Reaction samples lie this many noise deviations below the extended ramp.
REACTION_MARGIN = 5.0
#: Default mechanical stiffness of the force/torque sensor, N/m.
SENSOR_STIFFNESS = 2e7


def synthesize_trace(p: CollisionParams1D, opt: SimOptions | None = None) -> ForceTrace:
    """Simulated force trace with the seeded noise of ``opt`` added."""
    return simulate(p, opt).trace


def integrate_trace(trace: ForceTrace, method: str = "trapezoid", abs_tol: float = 1e-9) -> float:
    """Impulse of a trace, N·s.

    Args:
        trace: At least ``MIN_SAMPLES`` samples.
        method: ``trapezoid`` integrates the piecewise-linear interpolant;
            ``gauss-kronrod`` integrates a monotone cubic interpolant with the
            adaptive 7-15 rule, using the sample times as breakpoints.
        abs_tol: Absolute tolerance of the adaptive rule.
    """
    trace.require_analyzable()
    if method == "trapezoid":
        return float(trapezoid(trace.force, trace.t))
    if method == "gauss-kronrod":
        cubic = PchipInterpolator(trace.t, trace.force, extrapolate=False)
        result = gauss_kronrod(cubic, trace.t, abs_tol=abs_tol)
        if not result.converged:
            logger.warning(f"Trace integral may be inaccurate (error estimate {result.error:.3g} N·s)")
        return result.value
    raise ReflexDomainError(f"method must be one of {', '.join(INTEGRATION_METHODS)}, got {method!r}")


def _area(trace: ForceTrace, a: float, b: float) -> float:
    """Trapezoid area of the linear interpolant between times ``a`` and ``b``."""
    inside = (trace.t > a) & (trace.t < b)
    t = np.concatenate([[a], trace.t[inside], [b]])
    return float(trapezoid(np.interp(t, trace.t, trace.force), t))


# Segmentation


@dataclass(frozen=True)
class TraceSegments:
    """Phase boundaries of one contact episode, in trace time.

    ``ramp`` holds the line and ``reaction`` the parabola (highest power
    first) fitted to the sensing and reaction phases; they are ``None`` when
    the phase is too short to fit.
    """

    t_contact: float
    t_spike_end: float
    t1: float
    t2: float
    floor: float
    peak: float
    ramp: tuple[float, float] | None = None
    reaction: tuple[float, float, float] | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "t_contact": self.t_contact,
            "t_spike_end": self.t_spike_end,
            "t1": self.t1,
            "t2": self.t2,
            "floor": self.floor,
            "peak": self.peak,
        }


def _pre_contact(trace: ForceTrace) -> NDArray[np.float64]:
    n = max(MIN_EPISODE, int(len(trace) * PRE_CONTACT_FRACTION))
    return trace.force[:n]


def noise_floor(trace: ForceTrace) -> float:
    """``|mean| + 3·std`` of the pre-contact window."""
    head = _pre_contact(trace)
    floor = abs(float(np.mean(head))) + 3.0 * float(np.std(head))
    return max(floor, 1e-6 * float(np.max(np.abs(trace.force))))


def _episodes(above: NDArray[np.bool_], max_gap: int) -> list[tuple[int, int]]:
    """Inclusive index ranges of runs above the floor, short gaps merged."""
    padded = np.concatenate([[False], above, [False]])
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    runs = [(int(s), int(e) - 1) for s, e in zip(edges[::2], edges[1::2])]
    merged: list[tuple[int, int]] = []
    for start, stop in runs:
        if merged and start - merged[-1][1] - 1 < max_gap:
            merged[-1] = (merged[-1][0], stop)
        else:
            merged.append((start, stop))
    return [(s, e) for s, e in merged if e - s + 1 >= MIN_EPISODE]


def _first_run(above: NDArray[np.bool_], lo: int, hi: int) -> int:
    """First index in ``[lo, hi]`` that opens ``MIN_EPISODE`` samples above the floor."""
    hi = min(hi, len(above) - MIN_EPISODE)
    if hi < lo:
        return lo
    runs = sliding_window_view(above[lo:hi + MIN_EPISODE], MIN_EPISODE).all(axis=1)
    hits = np.flatnonzero(runs)
    return lo + int(hits[0]) if hits.size else lo


def _last_run(above: NDArray[np.bool_], lo: int, hi: int) -> int:
    """Last index in ``[lo, hi]`` that closes ``MIN_EPISODE`` samples above the floor."""
    lo = max(lo, MIN_EPISODE - 1)
    if hi < lo:
        return hi
    runs = sliding_window_view(above[lo - MIN_EPISODE + 1:hi + 1], MIN_EPISODE).all(axis=1)
    hits = np.flatnonzero(runs)
    return lo + int(hits[-1]) if hits.size else hi


def _crossing(t: NDArray[np.float64], f: NDArray[np.float64], i: int, level: float) -> float:
    """Time where the segment ``i - 1 -> i`` crosses ``level``."""
    if i == 0 or f[i] == f[i - 1]:
        return float(t[i])
    frac = (level - f[i - 1]) / (f[i] - f[i - 1])
    return float(t[i - 1] + min(max(frac, 0.0), 1.0) * (t[i] - t[i - 1]))


def _window(t: NDArray[np.float64], lo: float, hi: float, begin: float, end: float) -> NDArray[np.bool_]:
    span = end - begin
    return (t >= begin + lo * span) & (t <= begin + hi * span)


def segment_trace(trace: ForceTrace) -> TraceSegments:
    """Find contact, detection and release in a single-collision trace.

    Contact is the first sustained rise above the noise floor: a moving
    average over up to ``SUSTAIN_WINDOW`` samples must stay above it, and the
    crossing itself is placed on the raw samples. A spike is recognized by a
    half-maximum width below a tenth of the episode and ends one half-width
    after its falling half-maximum. A line is fitted to the sensing ramp; the
    samples that fall clearly below its extension form the reaction, whose
    fitted parabola gives the force maximum ``t1`` at its vertex and the
    release ``t2`` at its later root. Without a usable reaction fit, ``t1``
    is the largest sample after the spike and ``t2`` the return to the floor.

    Raises:
        SegmentationError: for traces without contact or with more than one
            contact episode.
    """
    trace.require_analyzable()
    t, f = trace.t, trace.force
    n = len(trace)
    floor = noise_floor(trace)
    width = int(np.clip(n // 50, MIN_EPISODE, SUSTAIN_WINDOW))
    smooth = uniform_filter1d(f, size=width, mode="nearest")
    episodes = _episodes(smooth > floor, max(MIN_EPISODE, int(n * EPISODE_GAP_FRACTION)))
    if not episodes:
        raise SegmentationError(f"no contact found above the noise floor {floor:.3g} N")
    if len(episodes) > 1:
        raise SegmentationError(
            f"{len(episodes)} contact episodes found; a trace must hold exactly one collision"
        )
    start, stop = episodes[0]
    above = f > floor
    first = _first_run(above, max(start - width, 0), stop)
    last = _last_run(above, first, min(stop + width, n - 1))
    if last - first + 1 < MIN_EPISODE:
        raise SegmentationError(f"contact episode at t={t[first]:.6g} s is too short to segment")
    t_contact = _crossing(t, f, first, floor)
    t_floor = _crossing(t, f, last + 1, floor) if last + 1 < n else float(t[last])

    peak_i = first + int(np.argmax(f[first:last + 1]))
    half = 0.5 * f[peak_i]
    fall_i = peak_i
    while fall_i <= last and f[fall_i] > half:
        fall_i += 1
    rise_i = peak_i
    while rise_i > first and f[rise_i - 1] > half:
        rise_i -= 1
    t_fall = _crossing(t, f, min(fall_i, n - 1), half)
    t_rise = _crossing(t, f, rise_i, half)
    has_spike = fall_i <= last and t_fall - t_rise < 0.1 * (t_floor - t_contact)
    t_spike_end = t_fall + (t_fall - float(t[peak_i])) if has_spike else t_contact

    after = np.flatnonzero(t > t_spike_end)
    after = after[after <= last]
    if after.size < MIN_EPISODE:
        raise SegmentationError("contact ends inside the impact spike")
    begin = int(after[0])
    # The moving average still carries the spike for half a window.
    lo = begin + width if begin + width < last else begin
    top_i = lo + int(np.argmax(smooth[lo:last + 1]))
    t_top = float(t[top_i])

    ramp_mask = _window(t, 0.1, 0.9, t_spike_end, t_top) & (t > t_spike_end)
    line = np.polyfit(t[ramp_mask] - t_top, f[ramp_mask], 1) if ramp_mask.sum() >= 3 else None

    t1 = float(t[begin + int(np.argmax(f[begin:last + 1]))])
    t2 = t_floor
    peak = float(np.interp(t1, t, f))
    reaction = None
    if line is not None:
        margin = max(REACTION_MARGIN * float(np.std(_pre_contact(trace))), 1e-3 * float(smooth[top_i]))
        j = last
        while j > begin and f[j] < np.polyval(line, t[j] - t_top) - margin:
            j -= 1
        react = np.arange(j + 1, last + 1)
        if react.size >= 4:
            t_r = float(t[react[0]])
            c2, c1, c0 = np.polyfit(t[react] - t_r, f[react], 2)
            vertex = t_r - c1 / (2.0 * c2) if c2 < 0 else math.nan
            if t_spike_end < vertex < t_floor:
                t1 = float(vertex)
                peak = float(c0 - c1 * c1 / (4.0 * c2))
                disc = c1 * c1 - 4.0 * c2 * c0
                if disc >= 0:
                    root = t_r + (-c1 - math.sqrt(disc)) / (2.0 * c2)
                    if root > t1:
                        t2 = float(root)
                reaction = (float(c2), float(c1 - 2.0 * c2 * t_r), float(c2 * t_r * t_r - c1 * t_r + c0))
    ramp = None if line is None else (float(line[0]), float(line[1] - line[0] * t_top))

    if not has_spike and ramp is not None and ramp[0] > 0:
        t_contact = max(float(t[max(first - 1, 0)]), min(-ramp[1] / ramp[0], t1))
        t_spike_end = t_contact
    if not t_contact < t1 < t2:
        raise SegmentationError(
            f"phase boundaries out of order: contact {t_contact:.6g}, t1 {t1:.6g}, t2 {t2:.6g}"
        )
    segments = TraceSegments(
        t_contact=t_contact,
        t_spike_end=min(t_spike_end, t1),
        t1=t1,
        t2=t2,
        floor=floor,
        peak=peak,
        ramp=ramp,
        reaction=reaction,
    )
    logger.info(
        f"Segmented {trace.source or 'trace'}: contact {t_contact:.6g} s, "
        f"t1 {t1:.6g} s, t2 {t2:.6g} s (floor {floor:.3g} N)"
    )
    return segments


def trace_breakdown(trace: ForceTrace) -> PhaseBreakdown:
    """Per-phase impulses of a trace, measured from its segmentation."""
    seg = segment_trace(trace)
    return PhaseBreakdown.from_phases(
        _area(trace, seg.t_contact, seg.t_spike_end),
        _area(trace, seg.t_spike_end, seg.t1),
        _area(trace, seg.t1, seg.t2),
        seg.t1 - seg.t_contact,
        seg.t2 - seg.t_contact,
    )


# Fitting


def model_force(
    t: ArrayLike,
    m_f: float,
    k_s: float,
    F_s: float,
    a: float,
    k_m: float,
    v_0: float,
    t_c: float,
) -> NDArray[np.float64]:
    """Piecewise contact force of one collision.

    A half-sine spike of stiffness ``k_m`` carrying ``m_f * v_0``, a ramp of
    slope ``k * v_0`` up to ``F_s`` and the parabolic decay
    ``F_s - k_m * a * tau**2 / 2`` down to zero, all starting at ``t_c``.
    """
    tau = np.asarray(t, dtype=float) - t_c
    k = combined_stiffness(k_m, k_s)
    t1 = F_s / (k * v_0)
    omega = math.sqrt(k_m / m_f)
    spike = np.where(
        (tau >= 0) & (tau <= math.pi / omega),
        0.5 * m_f * v_0 * omega * np.sin(omega * np.clip(tau, 0.0, None)),
        0.0,
    )
    ramp = np.where((tau >= 0) & (tau <= t1), k * v_0 * tau, 0.0)
    decay = np.where(tau > t1, np.maximum(F_s - 0.5 * k_m * a * (tau - t1) ** 2, 0.0), 0.0)
    return spike + ramp + decay


@dataclass(frozen=True)
class FitResult:
    m_f: float
    k_s: float
    F_s: float
    a: float
    k_m: float
    sigma: dict[str, float] = field(default_factory=dict)
    residual_rms: float = 0.0
    converged: bool = False
    t_contact: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "m_f": self.m_f,
            "k_s": self.k_s,
            "f_s": self.F_s,
            "a": self.a,
            "k_m": self.k_m,
            "sigma": {
                "m_f": self.sigma.get("m_f", math.nan),
                "k_s": self.sigma.get("k_s", math.nan),
                "f_s": self.sigma.get("F_s", math.nan),
                "a": self.sigma.get("a", math.nan),
            },
            "residual_rms": self.residual_rms,
            "converged": self.converged,
        }


FIT_NAMES = ("m_f", "k_s", "F_s", "a")


def initial_estimate(trace: ForceTrace, seg: TraceSegments, k_m: float, v_0: float) -> dict[str, float]:
    """Starting point of the fit, read off the segmentation."""
    if seg.ramp is None:
        raise SegmentationError("sensing ramp too short to estimate the stiffness")
    k = min(seg.ramp[0] / v_0, k_m * (1.0 - 1e-9))
    if k <= 0:
        raise SegmentationError(f"sensing ramp is not rising (slope {seg.ramp[0]:.3g} N/s)")
    if seg.reaction is not None and seg.reaction[0] < 0:
        a = -2.0 * seg.reaction[0] / k_m
    else:
        a = 2.0 * seg.peak / (k_m * (seg.t2 - seg.t1) ** 2)
    ramp_area = 0.5 * k * v_0 * (seg.t_spike_end - seg.t_contact) ** 2
    spike = _area(trace, seg.t_contact, seg.t_spike_end) - ramp_area
    return {
        "m_f": max(spike / v_0, 1e-6),
        "k_s": k * k_m / (k_m - k),
        "F_s": seg.peak,
        "a": a,
        "t_c": seg.t_contact,
    }


def fit_trace(
    trace: ForceTrace,
    k_m: float = SENSOR_STIFFNESS,
    v_0: float = 0.1,
    max_nfev: int = 2000,
) -> FitResult:
    """One-shot least-squares fit of the collision model to a trace.

    The segmentation gives a first estimate; a Levenberg-Marquardt fit of
    :func:`model_force` against every sample refines it. Positive parameters
    are fitted on a log scale; their standard deviations come from the
    residual covariance.

    Args:
        trace: Single-collision force trace.
        k_m: Fixed mechanical stiffness, N/m.
        v_0: Known pre-impact velocity, m/s.
        max_nfev: Evaluation budget of the refinement.

    Returns:
        FitResult: ``converged`` is False, with the initial estimate, when the
        refinement fails.
    """
    require_positive(k_m=k_m, v_0=v_0)
    seg = segment_trace(trace)
    init = initial_estimate(trace, seg, k_m, v_0)
    logger.info(
        "Initial estimate: " + ", ".join(f"{name}={value:.4g}" for name, value in init.items())
    )

    def model(t: NDArray[np.float64], log_mf: float, log_ks: float, log_Fs: float, log_a: float, t_c: float) -> NDArray[np.float64]:
        return model_force(t, math.exp(log_mf), math.exp(log_ks), math.exp(log_Fs), math.exp(log_a), k_m, v_0, t_c)

    p0 = [math.log(init[name]) for name in FIT_NAMES] + [init["t_c"]]
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", OptimizeWarning)
            popt, pcov = curve_fit(model, trace.t, trace.force, p0=p0, method="lm", maxfev=max_nfev)
    except (RuntimeError, OptimizeWarning, ValueError, OverflowError) as e:
        logger.warning(f"Trace fit did not converge, returning the initial estimate: {e}")
        residual = model(trace.t, *p0) - trace.force
        return FitResult(
            *(init[name] for name in FIT_NAMES),
            k_m=k_m,
            residual_rms=float(np.sqrt(np.mean(residual**2))),
            converged=False,
            t_contact=init["t_c"],
        )

    values = {name: math.exp(popt[i]) for i, name in enumerate(FIT_NAMES)}
    sigma_log = np.sqrt(np.abs(np.diag(pcov)))
    sigma = {name: values[name] * float(sigma_log[i]) for i, name in enumerate(FIT_NAMES)}
    residual = model(trace.t, *popt) - trace.force
    result = FitResult(
        **values,
        k_m=k_m,
        sigma=sigma,
        residual_rms=float(np.sqrt(np.mean(residual**2))),
        converged=True,
        t_contact=float(popt[-1]),
    )
    logger.info(
        f"Fitted m_f={result.m_f:.4g} kg, k_s={result.k_s:.4g} N/m, F_s={result.F_s:.4g} N, "
        f"a={result.a:.4g} m/s² (residual {result.residual_rms:.3g} N)"
    )
    return result

