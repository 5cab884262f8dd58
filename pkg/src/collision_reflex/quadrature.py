"""Adaptive 7-15 Gauss–Kronrod quadrature over breakpoint intervals."""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import quad_vec

from .errors import ReflexDomainError

logger = logging.getLogger(__name__)

Integrand = Callable[[float], float]


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error: float
    intervals: int
    converged: bool


def gauss_kronrod(
    f: Integrand,
    breakpoints: Sequence[float] | NDArray[np.float64],
    abs_tol: float = 1e-9,
    rel_tol: float = 0.0,
    max_intervals: int = 10_000,
) -> QuadratureResult:
    """Integrate ``f`` over ``[breakpoints[0], breakpoints[-1]]``.

    Every interval between consecutive breakpoints starts with its own 7-15
    estimate; the interval with the largest error is then bisected until the
    summed error estimate meets the tolerance.

    Args:
        f: Integrand, called with one abscissa at a time.
        breakpoints: Strictly increasing points, at least two. Kinks of the
            integrand should be among them.
        abs_tol: Absolute tolerance on the summed error estimate.
        rel_tol: Relative tolerance; the looser of the two applies.
        max_intervals: Bisection budget on top of the breakpoint intervals.

    Returns:
        QuadratureResult: ``converged`` is False when the budget ran out.
    """
    pts = np.asarray(breakpoints, dtype=float)
    if pts.ndim != 1 or pts.size < 2:
        raise ReflexDomainError("need at least two breakpoints")
    if np.any(np.diff(pts) <= 0):
        raise ReflexDomainError("breakpoints must be strictly increasing")

    # quad_vec stops before its first bisection when the initial intervals
    # already fill the limit, so the budget is counted on top of them.
    value, error, info = quad_vec(
        f,
        pts[0],
        pts[-1],
        epsabs=abs_tol,
        epsrel=rel_tol,
        points=pts[1:-1],
        quadrature="gk15",
        limit=pts.size - 1 + max_intervals,
        full_output=True,
    )
    if info.status == 1:
        logger.warning(
            f"Gauss-Kronrod hit the subdivision limit ({max_intervals}); error estimate {error:.3g}"
        )
    elif not info.success:
        logger.warning(f"Gauss-Kronrod stopped early: {info.message}")
    return QuadratureResult(
        value=float(value),
        error=float(error),
        intervals=len(info.intervals),
        converged=bool(info.success),
    )


def integrate(f: Integrand, a: float, b: float, abs_tol: float = 1e-9) -> float:
    """Adaptive Gauss–Kronrod integral of ``f`` over ``[a, b]``."""
    return gauss_kronrod(f, [a, b], abs_tol=abs_tol).value
