# this_file: tests/test_sim.py
"""Time-stepping simulation against the closed-form impulse."""

import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from collision_reflex.errors import ReflexDomainError, SimulationHorizonError
from collision_reflex.reflex import optimal_velocity, total_impulse
from collision_reflex.sim import (
    SimOptions,
    ValidationReport,
    random_params,
    rk4_step,
    simulate,
    simulated_impulse,
    validate_batch,
)


@pytest.mark.parametrize("spike_model", ["half-sine", "instantaneous"])
def test_default_collision_matches_closed_form(default_params, spike_model):
    expected = total_impulse(default_params)
    result = simulate(default_params, SimOptions(spike_model=spike_model))
    b = result.breakdown
    assert b.total == pytest.approx(0.19799, rel=0.02)
    assert b.i_plastic == pytest.approx(expected.i_plastic, rel=0.02)
    assert b.i_sensing == pytest.approx(expected.i_sensing, rel=0.02)
    assert b.i_reaction == pytest.approx(expected.i_reaction, rel=0.02)


@pytest.mark.parametrize("spike_model", ["half-sine", "instantaneous"])
def test_event_times_within_one_step(default_params, spike_model):
    opt = SimOptions(spike_model=spike_model)
    result = simulate(default_params, opt)
    expected = total_impulse(default_params)
    assert abs(result.breakdown.t1 - expected.t1) <= opt.dt
    assert abs(result.breakdown.t2 - expected.t2) <= opt.dt
    assert result.events.contact == pytest.approx(opt.t_pre)
    assert result.events.contact < result.events.spike_end <= result.events.detection < result.events.release


def test_phases_add_up_to_whole_trace(default_params):
    result = simulate(default_params)
    whole = trapezoid(result.trace.force, result.trace.t)
    assert whole == pytest.approx(result.breakdown.total, rel=1e-9)


def test_quiet_windows(default_params):
    opt = SimOptions(t_pre=0.01, t_post=0.005)
    result = simulate(default_params, opt)
    trace = result.trace
    assert trace.t[0] == 0.0
    assert np.all(trace.force[trace.t < result.events.contact] == 0.0)
    assert np.all(trace.force[trace.t > result.events.release] == 0.0)
    assert trace.t[-1] >= result.events.release + opt.t_post - opt.dt
    assert np.all(np.diff(trace.t) > 0)


def test_half_sine_stops_the_finger(default_params):
    result = simulate(default_params)
    assert result.finger_velocity == pytest.approx(0.0, abs=1e-4)
    peak = result.trace.force.max()
    # Spike amplitude m_f * v_0 * omega / 2 dwarfs the threshold.
    assert peak == pytest.approx(0.1 * 0.5 * math.sqrt(2e7 / 0.1) / 2, rel=0.01)


@pytest.mark.parametrize("k_c", [2e6, 2e7])
def test_half_sine_lasts_half_a_contact_period(default_params, k_c):
    events = simulate(default_params, SimOptions(k_c=k_c)).events
    assert events.spike_end - events.contact == pytest.approx(math.pi * math.sqrt(0.1 / k_c), abs=2e-8)


def test_phases_balance_at_optimal_velocity(default_params):
    v_star = optimal_velocity(default_params.F_s, default_params.k, default_params.m_f)
    b = simulated_impulse(default_params.replace(v_0=v_star))
    assert b.i_plastic == pytest.approx(b.i_sensing, rel=0.02)


def test_latency_lengthens_the_collision(default_params):
    prompt = simulated_impulse(default_params)
    late = simulated_impulse(default_params, SimOptions(latency=0.005))
    assert late.t1 == pytest.approx(prompt.t1)
    assert late.t2 > prompt.t2 + 0.005
    assert late.total > prompt.total


def test_horizon(default_params):
    with pytest.raises(SimulationHorizonError, match="t_max") as info:
        simulate(default_params, SimOptions(t_max=0.05))
    partial = info.value.partial
    assert partial is not None
    assert partial.t[-1] <= 0.05
    assert partial.force[-1] > 0


def test_noise_is_seeded(default_params):
    opt = SimOptions(noise_sigma=0.01, seed=7)
    a = simulate(default_params, opt).trace
    b = simulate(default_params, opt).trace
    clean = simulate(default_params).trace
    assert np.array_equal(a.force, b.force)
    assert not np.array_equal(a.force, clean.force)
    other = simulate(default_params, SimOptions(noise_sigma=0.01, seed=8)).trace
    assert not np.array_equal(a.force, other.force)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"dt": 0.0},
        {"spike_model": "gaussian"},
        {"t_pre": 1e-6},
        {"latency": -1.0},
        {"noise_sigma": math.nan},
    ],
)
def test_bad_options(kwargs):
    with pytest.raises(ReflexDomainError):
        SimOptions(**kwargs)


def test_rk4_integrates_a_cubic_exactly():
    def f(t, y):
        return (3 * t**2, 0.0, 0.0)

    y = rk4_step(f, 0.0, (0.0, 0.0, 0.0), 2.0)
    assert y[0] == pytest.approx(8.0)


def test_random_params_within_ranges():
    rng = np.random.default_rng(0)
    for _ in range(20):
        p = random_params(rng)
        assert 0.01 <= p.m_f <= 1.0
        assert 1.0 <= p.F_s <= 5.0


def test_small_batch(caplog):
    caplog.set_level("INFO")
    report = validate_batch(n=3, seed=1, opt=SimOptions(dt=1e-4))
    assert len(report.rows) == 3
    assert report.passed
    assert set(report.to_dict()) == {"n", "tolerance", "max_rel_error", "passed"}
    assert "Validated 3 parameter sets" in caplog.text


def test_failing_batch_warns(caplog):
    report = validate_batch(n=2, seed=1, opt=SimOptions(dt=1e-4), tolerance=1e-12)
    assert not report.passed
    assert "disagree" in caplog.text


def test_empty_report_passes():
    assert ValidationReport([], 0.02).passed


def test_batch_needs_a_set():
    with pytest.raises(ReflexDomainError):
        validate_batch(n=0)


@pytest.mark.slow
def test_hundred_random_sets_agree_within_two_percent():
    report = validate_batch(n=100, seed=0)
    assert report.max_rel_error < 0.02


@pytest.mark.slow
@pytest.mark.parametrize("spike_model", ["half-sine", "instantaneous"])
def test_halving_the_step_changes_little(default_params, spike_model):
    coarse = simulate(default_params, SimOptions(dt=1e-5, spike_model=spike_model)).breakdown
    fine = simulate(default_params, SimOptions(dt=5e-6, spike_model=spike_model)).breakdown
    assert fine.total == pytest.approx(coarse.total, rel=0.005)
    assert fine.i_sensing == pytest.approx(coarse.i_sensing, rel=0.005)
    assert fine.i_reaction == pytest.approx(coarse.i_reaction, rel=0.005)
