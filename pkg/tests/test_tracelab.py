# this_file: tests/test_tracelab.py
"""Trace integration, segmentation and model fitting."""

import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from collision_reflex.errors import ReflexDomainError, SegmentationError, TraceParseError
from collision_reflex.reflex import CollisionParams1D, ForceThreshold, total_impulse
from collision_reflex.sim import SimOptions, simulate
from collision_reflex.tracelab import (
    FitResult,
    ForceTrace,
    fit_trace,
    integrate_trace,
    model_force,
    noise_floor,
    read_trace,
    segment_trace,
    synthesize_trace,
    trace_breakdown,
    write_trace,
)


@pytest.fixture
def default_result(default_params):
    return simulate(default_params)


class TestIntegration:
    @pytest.mark.parametrize("method", ["trapezoid", "gauss-kronrod"])
    def test_constant_force(self, method):
        trace = ForceTrace(np.linspace(0.0, 0.5, 11), np.full(11, 2.0))
        assert integrate_trace(trace, method) == pytest.approx(1.0, rel=1e-12)

    @pytest.mark.parametrize("method", ["trapezoid", "gauss-kronrod"])
    def test_ramp_fixture(self, fixture_dir, method):
        trace = read_trace(fixture_dir / "ramp.csv")
        assert len(trace) == 11
        assert integrate_trace(trace, method) == pytest.approx(0.099, rel=1e-9)

    def test_methods_agree_on_simulated_trace(self, default_result):
        trace = default_result.trace
        trap = integrate_trace(trace, "trapezoid")
        gk = integrate_trace(trace, "gauss-kronrod")
        assert gk == pytest.approx(trap, rel=0.005)

    @pytest.mark.parametrize("factor", [0.5, 3.0, -1.0])
    def test_linear_in_force(self, default_result, factor):
        trace = default_result.trace
        assert integrate_trace(trace.scaled(factor)) == pytest.approx(factor * integrate_trace(trace), rel=1e-12)

    def test_unknown_method(self, default_result):
        with pytest.raises(ReflexDomainError, match="method"):
            integrate_trace(default_result.trace, "simpson")

    def test_too_few_samples(self):
        with pytest.raises(ReflexDomainError, match="at least"):
            integrate_trace(ForceTrace(np.arange(4.0), np.ones(4)))


class TestFiles:
    def test_round_trip(self, default_result, tmp_path):
        path = tmp_path / "trace.csv"
        write_trace(default_result.trace, path)
        assert path.read_text().splitlines()[0] == "t_s,force_n"
        back = read_trace(path)
        assert back.t == pytest.approx(default_result.trace.t, rel=1e-8, abs=1e-12)
        assert back.force == pytest.approx(default_result.trace.force, rel=1e-8, abs=1e-9)

    def test_non_increasing_time_reports_line(self, fixture_dir):
        with pytest.raises(TraceParseError, match="line 4") as info:
            read_trace(fixture_dir / "shuffled.csv")
        assert info.value.line == 4

    @pytest.mark.parametrize(
        "content, line",
        [
            ("time,force\n0,0\n", 1),
            ("t_s,force_n\n0,0\n0.1,abc\n", 3),
            ("t_s,force_n\n0,0,1\n", 2),
            ("t_s,force_n\n0,nan\n", 2),
            ("t_s,force_n\n", 2),
        ],
    )
    def test_malformed(self, tmp_path, content, line):
        path = tmp_path / "bad.csv"
        path.write_text(content)
        with pytest.raises(TraceParseError) as info:
            read_trace(path)
        assert info.value.line == line

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_trace(tmp_path / "absent.csv")

    def test_blank_lines_are_skipped(self, tmp_path):
        path = tmp_path / "blank.csv"
        path.write_text("t_s,force_n\n0,0\n\n0.1,1\n")
        assert len(read_trace(path)) == 2


class TestSegmentation:
    def test_simulated_trace(self, default_result):
        seg = segment_trace(default_result.trace)
        ev = default_result.events
        assert seg.t_contact == pytest.approx(ev.contact, abs=2e-5)
        assert seg.t1 == pytest.approx(ev.detection, abs=2e-5)
        assert seg.t2 == pytest.approx(ev.release, abs=2e-5)
        assert seg.t_contact < seg.t_spike_end < seg.t1
        assert seg.peak == pytest.approx(3.0, rel=0.01)

    def test_breakdown_matches_closed_form(self, default_result, default_params):
        expected = total_impulse(default_params)
        b = trace_breakdown(default_result.trace)
        assert b.total == pytest.approx(expected.total, rel=0.02)
        assert b.i_plastic == pytest.approx(expected.i_plastic, rel=0.02)
        assert b.i_reaction == pytest.approx(expected.i_reaction, rel=0.05)

    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 11])
    def test_noise_keeps_boundaries(self, soft_finger_params, seed):
        dt = SimOptions().dt
        clean = segment_trace(synthesize_trace(soft_finger_params))
        noisy = segment_trace(synthesize_trace(soft_finger_params, SimOptions(noise_sigma=0.01, seed=seed)))
        assert noisy.t_contact == pytest.approx(clean.t_contact, abs=5 * dt)
        assert noisy.t1 == pytest.approx(clean.t1, abs=5 * dt)
        assert noisy.t2 == pytest.approx(clean.t2, abs=5 * dt)

    def test_noise_after_release_is_not_a_second_contact(self, soft_finger_params):
        trace = synthesize_trace(soft_finger_params, SimOptions(noise_sigma=0.01, seed=5, t_post=0.2))
        seg = segment_trace(trace)
        assert seg.t2 < trace.t[-1] - 0.1

    def test_ramp_without_spike(self):
        t = np.linspace(0.0, 0.2, 2001)
        tau = t - 0.05
        force = np.where((tau > 0) & (tau <= 0.06), 50.0 * tau, 0.0)
        tail = tau - 0.06
        force = np.where(tau > 0.06, np.maximum(3.0 - 5000.0 * tail**2, 0.0), force)
        seg = segment_trace(ForceTrace(t, force))
        assert seg.t_contact == pytest.approx(0.05, abs=2e-4)
        assert seg.t_spike_end == seg.t_contact
        assert seg.t1 == pytest.approx(0.11, abs=2e-4)
        assert seg.t2 == pytest.approx(0.11 + math.sqrt(3.0 / 5000.0), abs=2e-4)

    def test_no_contact(self):
        with pytest.raises(SegmentationError, match="no contact"):
            segment_trace(ForceTrace(np.linspace(0.0, 1.0, 100), np.zeros(100)))

    def test_two_collisions(self):
        t = np.linspace(0.0, 1.0, 1001)
        bump = np.clip(1.0 - np.abs(t - 0.25) / 0.05, 0.0, None)
        bump2 = np.clip(1.0 - np.abs(t - 0.65) / 0.05, 0.0, None)
        with pytest.raises(SegmentationError, match="2 contact episodes"):
            segment_trace(ForceTrace(t, bump + bump2))

    def test_noise_floor(self):
        rng = np.random.default_rng(3)
        force = rng.normal(0.0, 0.1, 2000)
        floor = noise_floor(ForceTrace(np.arange(2000.0), force))
        assert 0.2 < floor < 0.45


class TestModel:
    def test_model_integrates_to_closed_form(self, soft_finger_params):
        p = soft_finger_params
        t = np.linspace(-0.001, 0.08, 400001)
        force = model_force(t, p.m_f, p.k_s, p.F_s, p.a, p.k_m, p.v_0, 0.0)
        assert trapezoid(force, t) == pytest.approx(total_impulse(p).total, rel=0.01)

    def test_model_is_zero_before_contact(self, soft_finger_params):
        p = soft_finger_params
        assert np.all(model_force([-1.0, -1e-6], p.m_f, p.k_s, p.F_s, p.a, p.k_m, p.v_0, 0.0) == 0.0)


class TestFit:
    def test_clean_soft_finger(self, soft_finger_params):
        trace = synthesize_trace(soft_finger_params, SimOptions(k_c=2e7))
        fit = fit_trace(trace, k_m=2e7, v_0=0.1)
        assert fit.converged
        assert fit.m_f == pytest.approx(0.1, rel=0.005)
        assert fit.k_s == pytest.approx(440.0, rel=0.005)
        assert fit.F_s == pytest.approx(3.0, rel=0.005)
        assert fit.a == pytest.approx(10.0, rel=0.005)

    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 11])
    def test_noisy_soft_finger(self, soft_finger_params, seed):
        trace = synthesize_trace(soft_finger_params, SimOptions(noise_sigma=0.01, seed=seed))
        fit = fit_trace(trace, k_m=2e7, v_0=0.1)
        assert fit.converged
        assert fit.m_f == pytest.approx(0.1, rel=0.05)
        assert fit.k_s == pytest.approx(440.0, rel=0.05)
        assert fit.F_s == pytest.approx(3.0, rel=0.05)
        assert fit.a == pytest.approx(10.0, rel=0.15)
        assert all(math.isfinite(s) and s >= 0 for s in fit.sigma.values())

    def test_failed_refinement_returns_estimate(self, soft_finger_params, caplog, monkeypatch):
        import collision_reflex.tracelab as tracelab

        def refuse(*args, **kwargs):
            raise RuntimeError("Optimal parameters not found")

        monkeypatch.setattr(tracelab, "curve_fit", refuse)
        trace = synthesize_trace(soft_finger_params)
        fit = fit_trace(trace, k_m=2e7, v_0=0.1)
        assert not fit.converged
        assert fit.F_s == pytest.approx(3.0, rel=0.1)
        assert "did not converge" in caplog.text

    def test_to_dict(self):
        data = FitResult(0.1, 440.0, 3.0, 10.0, 2e7, sigma={"m_f": 0.01}).to_dict()
        assert set(data) == {"m_f", "k_s", "f_s", "a", "k_m", "sigma", "residual_rms", "converged"}
        assert data["sigma"]["m_f"] == 0.01
        assert math.isnan(data["sigma"]["a"])


def random_soft_fingers(seed, count):
    rng = np.random.default_rng(seed)
    return [
        CollisionParams1D(
            m_f=rng.uniform(0.05, 0.5), m_r=1.0, k_m=2e7, k_s=rng.uniform(200.0, 1000.0),
            sensing=ForceThreshold(rng.uniform(2.0, 5.0)), v_0=rng.uniform(0.1, 0.3),
            F_a=rng.uniform(5.0, 20.0),
        )
        for _ in range(count)
    ]


@pytest.mark.slow
def test_fit_recovers_random_parameter_sets():
    for i, p in enumerate(random_soft_fingers(7, 50)):
        clean = simulate(p).trace
        fit = fit_trace(clean, k_m=2e7, v_0=p.v_0)
        assert fit.converged, p
        for name, truth in (("m_f", p.m_f), ("k_s", p.k_s), ("F_s", p.F_s), ("a", p.a)):
            assert getattr(fit, name) == pytest.approx(truth, rel=0.005), (name, p)
        noisy = fit_trace(clean.with_noise(0.01, seed=i), k_m=2e7, v_0=p.v_0)
        assert noisy.converged, p
        for name, truth in (("m_f", p.m_f), ("k_s", p.k_s), ("F_s", p.F_s)):
            assert getattr(noisy, name) == pytest.approx(truth, rel=0.05), (name, p)
