# this_file: tests/test_integration.py
"""End-to-end workflows through the in-process CLI entry point."""

import csv
import json

import pytest

from collision_reflex.__main__ import run
from collision_reflex.sim import SimOptions, simulate
from collision_reflex.tracelab import write_trace


def run_json(capsys, *args):
    code = run([str(a) for a in args])
    captured = capsys.readouterr()
    assert code == 0, captured.err
    return json.loads(captured.out)


@pytest.mark.parametrize(
    "sensing, axis",
    [
        ("force", "k_m"),
        ("position", "k_s"),
    ],
)
def test_stiffness_studies(tmp_path, capsys, sensing, axis):
    preset = "force-stiffness" if sensing == "force" else "position-stiffness"
    out = tmp_path / f"{preset}.csv"
    assert run(["sweep", "--config", f"preset:{preset}", "--out", str(out)]) == 0
    with out.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 100
    totals = [float(row["total"]) for row in rows]
    if sensing == "force":
        assert all(b <= a for a, b in zip(totals, totals[1:]))
    else:
        assert all(b > a for a, b in zip(totals, totals[1:]))
    assert rows[0][f"axis_{axis}"] == rows[0][axis]


def test_velocity_radius_study(capsys):
    data = run_json(capsys, "sweep", "--config", "preset:velocity-radius")
    assert len(data["rows"]) == 400
    assert data["columns"][:2] == ["axis_v_0", "axis_r"]
    best = data["minimum"]
    assert best["feasible"] is True
    # The low-impulse region sits inside the grid, not on its edges.
    assert 0.01 < best["r"] < 0.1
    assert 0.05 < best["v_0"] < 2.0
    radii = sorted({row[1] for row in data["rows"]})
    assert radii[0] < best["r"] < radii[-1]


def test_measured_trace_workflow(tmp_path, capsys, soft_finger_params):
    trace = simulate(soft_finger_params, SimOptions(noise_sigma=0.01, seed=5)).trace
    path = tmp_path / "measured.csv"
    write_trace(trace, path)

    segments = run_json(capsys, "segment", "--trace", path)
    assert segments["t1"] - segments["t_contact"] == pytest.approx(3.0 / (0.1 * 439.99), rel=0.02)

    impulse = run_json(capsys, "integrate", "--trace", path)
    assert impulse["method"] == "gauss-kronrod"
    assert impulse["impulse"] == pytest.approx(0.1126, rel=0.02)

    fit = run_json(capsys, "fit", "--trace", path, "--v0", "0.1")
    assert fit["converged"] is True
    assert fit["m_f"] == pytest.approx(0.1, rel=0.05)
    assert fit["k_s"] == pytest.approx(440.0, rel=0.05)
    assert fit["f_s"] == pytest.approx(3.0, rel=0.05)
    assert set(fit["sigma"]) == {"m_f", "k_s", "f_s", "a"}


def test_arm_workflow(capsys):
    metrics = run_json(capsys, "metrics", "--q2-deg", "60", "--theta-deg", "30")
    assert 0.0 <= metrics["imf"] <= 1.0
    assert len(metrics["gie_axes"]["lengths"]) == 2
    masses = metrics["effective_mass"]
    assert masses["structure"] > 0 and masses["actuators"] > 0

    surface = run_json(capsys, "surface", "--q2-deg", "60", "--n", "36")
    assert surface["n"] == 36
    assert surface["min_total"] <= surface["max_total"]


def test_straight_arm_surface_is_flagged(capsys):
    data = run_json(capsys, "surface", "--q2-deg", "0", "--n", "8")
    flag = data["columns"].index("flag")
    assert {row[flag] for row in data["rows"]} == {"singular"}
    assert data["min_total"] is None
