# this_file: tests/test_config.py
"""Run configuration loading, overrides and presets."""

import json

import pytest

from collision_reflex.config import PRESETS, RunConfig, load_config, preset
from collision_reflex.errors import ConfigError, ReflexDomainError
from collision_reflex.reflex import ForceThreshold, PositionErrorThreshold


def test_defaults_build_the_desk_scale_collision():
    config = RunConfig()
    p = config.params.build()
    assert p.m_f == 0.1
    assert p.sensing == ForceThreshold(3.0)
    assert config.sweep.build(p).axes[0].name == "v_0"
    assert config.sim.build(seed=3).seed == 3
    assert config.model.build().l1 == 0.15


def test_load_fixture(fixture_dir):
    config = RunConfig.load(fixture_dir / "default.json")
    assert config.params.F_a == 10.0
    assert config.sim.dt == 1e-5


def test_round_trip(tmp_path):
    config = preset("position-stiffness")
    path = tmp_path / "run.json"
    config.dump(path)
    assert RunConfig.load(path) == config
    assert json.loads(path.read_text())["params"]["sensing"] == "position"


def test_dumps_is_sorted():
    text = RunConfig().dumps()
    assert list(json.loads(text)) == sorted(json.loads(text))
    assert text.endswith("\n")


def test_integers_widen_to_floats():
    config = RunConfig.from_dict({"params": {"k_m": 2000}})
    assert config.params.k_m == 2000.0
    assert isinstance(config.params.k_m, float)


@pytest.mark.parametrize(
    "data, match",
    [
        ({"parms": {}}, "unknown sections"),
        ({"params": {"mass": 1.0}}, "unknown keys"),
        ({"params": {"m_f": "heavy"}}, "must be a number"),
        ({"params": {"m_f": True}}, "must be a number"),
        ({"model": {"n": 36.5}}, "must be an integer"),
        ({"model": {"series_with_contact": 1}}, "true or false"),
        ({"params": []}, "must be an object"),
        ({"motor": {"spec": 3}}, "object or null"),
    ],
)
def test_strict_validation(data, match):
    with pytest.raises(ConfigError, match=match):
        RunConfig.from_dict(data)


def test_invalid_json_reports_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "params": {\n    "m_f": 0.1,\n  }\n}\n')
    with pytest.raises(ConfigError, match="line 4"):
        RunConfig.load(path)


def test_overrides():
    config = RunConfig().with_overrides(["params.v_0=0.7", "params.sensing=position", "model.K=[50, 60]"])
    assert config.params.v_0 == 0.7
    assert config.params.build().sensing == PositionErrorThreshold(0.03)
    assert config.model.K == [50, 60]


@pytest.mark.parametrize(
    "item, match",
    [
        ("v_0=0.7", "section.key=value"),
        ("params.v_0", "section.key=value"),
        ("robot.v_0=1", "unknown section"),
        ("params.speed=1", "unknown key"),
        ("params.v_0=fast", "must be a number"),
    ],
)
def test_bad_overrides(item, match):
    with pytest.raises(ConfigError, match=match):
        RunConfig().with_overrides([item])


def test_presets():
    assert PRESETS[0] == "default"
    for name in PRESETS:
        assert isinstance(preset(name), RunConfig)
    grid = preset("velocity-radius").sweep.axes
    assert [axis["name"] for axis in grid] == ["v_0", "r"]
    stiffness = preset("force-stiffness")
    axis = stiffness.sweep.build(stiffness.params.build()).axes[0]
    assert (axis.name, axis.min, axis.max, axis.count, axis.spacing) == ("k_m", 100.0, 1e4, 100, "log")


def test_unknown_preset():
    with pytest.raises(ConfigError, match="unknown preset"):
        preset("fastest")


def test_load_config_sources(fixture_dir):
    assert load_config() == RunConfig()
    assert load_config("preset:position-stiffness").params.sensing == "position"
    assert load_config(fixture_dir / "default.json", ["params.v_0=1.5"]).params.v_0 == 1.5


def test_bad_model_choices():
    with pytest.raises(ConfigError, match="model.motor"):
        RunConfig.from_dict({"model": {"motor": "M9"}}).model.build()
    with pytest.raises(ConfigError, match="model.K"):
        RunConfig.from_dict({"model": {"K": [1.0]}}).model.build()
    with pytest.raises(ConfigError, match="params.sensing"):
        RunConfig.from_dict({"params": {"sensing": "optical"}}).params.build()


def test_motor_section():
    motor = RunConfig.from_dict({"motor": {"reference": "custom", "spec": {
        "r": 0.05, "l": 0.01, "J_m": 1e-5, "tau_c": 0.3, "tau_p": 0.9}}}).motor
    assert motor.reference_motor().name == "custom"
    with pytest.raises(ConfigError, match="not built in"):
        RunConfig.from_dict({"motor": {"reference": "M7"}}).motor.reference_motor()
    with pytest.raises(ConfigError, match="motor.spec"):
        RunConfig.from_dict({"motor": {"spec": {"radius": 1.0}}}).motor.reference_motor()


def test_model_spec_replaces_motor_values():
    model = RunConfig.from_dict({"model": {"spec": {
        "M_jj": [2e-4, 1e-4], "tau_max": [2.0, 1.5],
        "link1": {"mass": 0.5, "com": 0.1, "inertia_com": 1e-3},
    }}}).model.build()
    assert model.M_jj == (2e-4, 1e-4)
    assert model.tau_max == (2.0, 1.5)
    assert model.link1.mass == 0.5
    # Untouched parts still come from the motor.
    assert model.link2 == RunConfig().model.build().link2


def test_model_spec_from_override():
    config = RunConfig().with_overrides(['model.spec={"tau_max": [0.8, 0.6]}'])
    assert config.model.build().tau_max == (0.8, 0.6)


@pytest.mark.parametrize(
    "spec, match",
    [
        ({"rotor": [1e-4, 1e-4]}, "unknown keys"),
        ({"M_jj": [1e-4]}, "one value per joint"),
        ({"link2": {"mass": 0.2, "length": 0.15}}, "model.spec.link2"),
    ],
)
def test_bad_model_spec(spec, match):
    with pytest.raises(ConfigError, match=match):
        RunConfig.from_dict({"model": {"spec": spec}}).model.build()


def test_model_spec_rejects_zero_rotor():
    with pytest.raises(ReflexDomainError, match="M_jj"):
        RunConfig.from_dict({"model": {"spec": {"M_jj": [0.0, 1e-4]}}}).model.build()


def test_sweep_axis_keys():
    base = RunConfig().params.build()
    with pytest.raises(ConfigError, match="unknown keys"):
        RunConfig.from_dict({"sweep": {"axes": [{"name": "v_0", "min": 0.1, "max": 1, "count": 3, "step": 1}]}}).sweep.build(base)
    with pytest.raises(ConfigError, match="missing key"):
        RunConfig.from_dict({"sweep": {"axes": [{"name": "v_0", "min": 0.1}]}}).sweep.build(base)
