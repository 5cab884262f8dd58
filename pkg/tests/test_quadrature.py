# this_file: tests/test_quadrature.py

import math

import numpy as np
import pytest

from collision_reflex.errors import ReflexDomainError
from collision_reflex.quadrature import gauss_kronrod, integrate


@pytest.mark.parametrize("degree", [0, 5, 13, 22])
def test_polynomials(degree):
    assert integrate(lambda x: x**degree, 0.0, 1.0) == pytest.approx(1.0 / (degree + 1), rel=1e-12)


@pytest.mark.parametrize(
    "f, a, b, expected",
    [
        (np.sin, 0.0, math.pi, 2.0),
        (np.exp, -1.0, 2.0, math.exp(2.0) - math.exp(-1.0)),
        (lambda x: 1.0 / (1.0 + x**2), -10.0, 10.0, 2.0 * math.atan(10.0)),
        (np.sqrt, 0.0, 1.0, 2.0 / 3.0),
    ],
)
def test_integrate(f, a, b, expected):
    assert integrate(f, a, b, abs_tol=1e-11) == pytest.approx(expected, abs=1e-10)


def test_breakpoints_handle_kinks():
    result = gauss_kronrod(abs, [-1.0, 0.0, 2.0])
    assert result.value == pytest.approx(2.5, abs=1e-14)
    assert result.converged
    assert result.error < 1e-9


def test_many_breakpoints_converge():
    knots = np.linspace(0.0, 1.0, 501)
    result = gauss_kronrod(lambda x: 3.0 * x**2, knots)
    assert result.converged
    assert result.intervals >= 500
    assert result.value == pytest.approx(1.0, rel=1e-12)


def test_subdivision_limit(caplog):
    result = gauss_kronrod(lambda x: np.sign(x - 1.0 / 3.0), [0.0, 1.0], abs_tol=1e-15, max_intervals=20)
    assert not result.converged
    assert result.intervals >= 20
    assert result.value == pytest.approx(1.0 / 3.0, abs=1e-3)
    assert "subdivision limit" in caplog.text


@pytest.mark.parametrize("points", [[0.0], [0.0, 1.0, 1.0], [[0.0, 1.0]]])
def test_bad_breakpoints(points):
    with pytest.raises(ReflexDomainError):
        gauss_kronrod(np.sin, points)
