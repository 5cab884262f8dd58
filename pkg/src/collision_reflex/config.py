"""Run configuration: a strict JSON document with one section per concern.

Every value is in SI units (m, kg, N, s, rad). Unknown keys are rejected so
that a typo never silently falls back to a default.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .manipulator import Configuration, LinkInertia, TwoLinkModel
from .reflex import (
    CollisionParams1D,
    ForceThreshold,
    PositionErrorThreshold,
    SweepAxis,
    SweepGrid,
)
from .scaling import (
    DEFAULT_LAW,
    DEFAULT_LINK_LENGTH,
    MotorSpec,
    MotorSweepSource,
    ScalingLaw,
    builtin_motors,
    law_by_name,
)
from .sim import SimOptions

logger = logging.getLogger(__name__)


@dataclass
class ParamsSection:
    m_f: float = 0.1
    m_r: float = 1.0
    k_m: float = 1000.0
    k_s: float = 100.0
    sensing: str = "force"  # "force" or "position"
    F_s: float = 3.0
    e_s: float = 0.03
    v_0: float = 0.5
    F_a: float = 10.0

    def build(self) -> CollisionParams1D:
        if self.sensing == "force":
            mode: ForceThreshold | PositionErrorThreshold = ForceThreshold(self.F_s)
        elif self.sensing == "position":
            mode = PositionErrorThreshold(self.e_s)
        else:
            raise ConfigError(f"params.sensing must be 'force' or 'position', got {self.sensing!r}")
        return CollisionParams1D(
            m_f=self.m_f, m_r=self.m_r, k_m=self.k_m, k_s=self.k_s,
            sensing=mode, v_0=self.v_0, F_a=self.F_a,
        )


@dataclass
class MotorSection:
    """Reference motor, by built-in name or as explicit fields, and its scaling law."""

    reference: str = "M2"
    spec: dict[str, float] | None = None
    law: str = DEFAULT_LAW
    torque_floor: float = 1.3
    link_length: float = DEFAULT_LINK_LENGTH

    def reference_motor(self) -> MotorSpec:
        if self.spec is not None:
            try:
                return MotorSpec(name=self.reference, **self.spec)
            except TypeError as e:
                raise ConfigError(f"motor.spec: {e}") from e
        motors = builtin_motors()
        if self.reference not in motors:
            raise ConfigError(
                f"motor.reference {self.reference!r} is not built in ({', '.join(motors)}); "
                "give motor.spec instead"
            )
        return motors[self.reference]

    def scaling_law(self) -> ScalingLaw:
        return law_by_name(self.law)

    def sweep_source(self) -> MotorSweepSource:
        return MotorSweepSource(self.reference_motor(), self.scaling_law(), self.torque_floor, self.link_length)


@dataclass
class ModelSection:
    """Two-link arm, its configuration and the surface resolution.

    ``spec`` replaces parts of the arm built from ``motor``: ``M_jj`` and
    ``tau_max`` (one value per joint) and ``link1``/``link2`` (``mass``,
    ``com``, ``inertia_com``).
    """

    l1: float = 0.15
    l2: float = 0.15
    link_mass: float = 0.2
    motor: str = "M2"
    spec: dict[str, Any] | None = None
    K: list[float] = field(default_factory=lambda: [100.0, 100.0])
    k_m: float = 2e7
    q1: float = 0.0
    q2: float = math.pi / 4
    n: int = 360
    series_with_contact: bool = False
    saturation: str = "scaled"

    def build(self) -> TwoLinkModel:
        motors = builtin_motors()
        if self.motor not in motors:
            raise ConfigError(f"model.motor must be one of {', '.join(motors)}, got {self.motor!r}")
        if len(self.K) != 2:
            raise ConfigError(f"model.K needs one stiffness per joint, got {self.K!r}")
        model = TwoLinkModel.from_motor(
            motors[self.motor], l1=self.l1, l2=self.l2, link_mass=self.link_mass,
            K=(float(self.K[0]), float(self.K[1])), k_m=self.k_m,
        )
        if self.spec is None:
            return model
        unknown = set(self.spec) - {"M_jj", "tau_max", "link1", "link2"}
        if unknown:
            raise ConfigError(f"model.spec: unknown keys {sorted(unknown)}")
        changes: dict[str, Any] = {}
        for key in ("M_jj", "tau_max"):
            if key in self.spec:
                pair = self.spec[key]
                if not isinstance(pair, list) or len(pair) != 2:
                    raise ConfigError(f"model.spec.{key} needs one value per joint, got {pair!r}")
                changes[key] = (float(pair[0]), float(pair[1]))
        for key in ("link1", "link2"):
            if key in self.spec:
                try:
                    changes[key] = LinkInertia(**self.spec[key])
                except TypeError as e:
                    raise ConfigError(f"model.spec.{key}: {e}") from e
        return dataclasses.replace(model, **changes)

    def configuration(self) -> Configuration:
        return Configuration(self.q1, self.q2)


@dataclass
class SweepSection:
    axes: list[dict[str, Any]] = field(
        default_factory=lambda: [{"name": "v_0", "min": 0.05, "max": 2.0, "count": 40, "spacing": "linear"}]
    )

    def build(self, base: CollisionParams1D) -> SweepGrid:
        axes = []
        for i, raw in enumerate(self.axes):
            unknown = set(raw) - {"name", "min", "max", "count", "spacing"}
            if unknown:
                raise ConfigError(f"sweep.axes[{i}]: unknown keys {sorted(unknown)}")
            try:
                axes.append(SweepAxis(
                    name=raw["name"], min=float(raw["min"]), max=float(raw["max"]),
                    count=int(raw["count"]), spacing=raw.get("spacing", "linear"),
                ))
            except KeyError as e:
                raise ConfigError(f"sweep.axes[{i}]: missing key {e}") from e
        return SweepGrid(tuple(axes), base)


@dataclass
class SimSection:
    dt: float = 1e-5
    t_max: float = 2.0
    spike_model: str = "half-sine"
    k_c: float = 2e7
    noise_sigma: float = 0.0
    latency: float = 0.0
    t_pre: float = 0.02
    t_post: float = 0.02
    batch: int = 100
    tolerance: float = 0.02

    def build(self, seed: int) -> SimOptions:
        return SimOptions(
            dt=self.dt, t_max=self.t_max, spike_model=self.spike_model, k_c=self.k_c,
            noise_sigma=self.noise_sigma, seed=seed, latency=self.latency,
            t_pre=self.t_pre, t_post=self.t_post,
        )


@dataclass
class IoSection:
    trace: str = ""
    out: str = ""
    format: str = "auto"  # "auto" picks by the extension of out
    integration: str = "gauss-kronrod"
    seed: int = 0


SECTIONS: dict[str, type] = {
    "params": ParamsSection,
    "motor": MotorSection,
    "model": ModelSection,
    "sweep": SweepSection,
    "sim": SimSection,
    "io": IoSection,
}


def _default(f: dataclasses.Field) -> Any:  # type: ignore[type-arg]
    if f.default_factory is not dataclasses.MISSING:
        return f.default_factory()
    return f.default


def _coerce(key: str, default: Any, value: Any) -> Any:
    """Check ``value`` against the type of the field default; ints widen to floats."""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be true or false, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number, got {value!r}")
        return float(value)
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return value
    if isinstance(default, str) and not isinstance(value, str):
        raise ConfigError(f"{key} must be a string, got {value!r}")
    if isinstance(default, list) and not isinstance(value, list):
        raise ConfigError(f"{key} must be a list, got {value!r}")
    if default is None and value is not None and not isinstance(value, dict):
        raise ConfigError(f"{key} must be an object or null, got {value!r}")
    return value


def _section(name: str, cls: type, raw: Any) -> Any:
    if not isinstance(raw, dict):
        raise ConfigError(f"section {name!r} must be an object, got {type(raw).__name__}")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {', '.join(sorted(unknown))}")
    values = {}
    for f in dataclasses.fields(cls):
        if f.name in raw:
            values[f.name] = _coerce(f"{name}.{f.name}", _default(f), raw[f.name])
    return cls(**values)


@dataclass
class RunConfig:
    params: ParamsSection = field(default_factory=ParamsSection)
    motor: MotorSection = field(default_factory=MotorSection)
    model: ModelSection = field(default_factory=ModelSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    sim: SimSection = field(default_factory=SimSection)
    io: IoSection = field(default_factory=IoSection)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RunConfig:
        if not isinstance(data, dict):
            raise ConfigError("a run configuration must be a JSON object")
        unknown = set(data) - set(SECTIONS)
        if unknown:
            raise ConfigError(f"unknown sections: {', '.join(sorted(unknown))}")
        return cls(**{name: _section(name, SECTIONS[name], data.get(name, {})) for name in SECTIONS})

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def load(cls, path: str | Path) -> RunConfig:
        path = Path(path)
        logger.info(f"Reading {path}...")
        text = path.read_text(encoding="utf-8")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: line {e.lineno}: {e.msg}") from e
        return cls.from_dict(data)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def dump(self, path: str | Path) -> None:
        path = Path(path)
        logger.info(f"Saving {path}...")
        path.write_text(self.dumps(), encoding="utf-8")

    def with_overrides(self, overrides: list[str] | tuple[str, ...]) -> RunConfig:
        """Apply ``section.key=value`` overrides; values are parsed as JSON when possible."""
        data = self.to_dict()
        for item in overrides:
            key, sep, raw = str(item).partition("=")
            section, dot, name = key.strip().partition(".")
            if not sep or not dot or not name:
                raise ConfigError(f"override {item!r} must look like section.key=value")
            if section not in data:
                raise ConfigError(f"override {item!r}: unknown section {section!r}")
            if name not in data[section]:
                raise ConfigError(f"override {item!r}: unknown key {name!r} in {section!r}")
            try:
                value = json.loads(raw)
            except json.JSONDecodeError:
                value = raw
            data[section][name] = value
            logger.info(f"Override {section}.{name} = {value!r}")
        return RunConfig.from_dict(data)


def preset(name: str) -> RunConfig:
    """Built-in configurations reproducing the standard sweep studies.

    ``velocity-radius`` sweeps the pre-impact velocity against the motor radius,
    ``force-stiffness`` the mechanical stiffness under force-threshold sensing and
    ``position-stiffness`` the software stiffness under position-error sensing.
    """
    config = RunConfig()
    if name == "default":
        return config
    if name == "velocity-radius":
        config.params = ParamsSection(m_f=0.1, m_r=1.0, k_m=1000.0, k_s=100.0, F_s=3.0, v_0=0.5, F_a=10.0)
        config.sweep.axes = [
            {"name": "v_0", "min": 0.05, "max": 2.0, "count": 40, "spacing": "linear"},
            {"name": "r", "min": 0.01, "max": 0.1, "count": 10, "spacing": "linear"},
        ]
        return config
    if name == "force-stiffness":
        config.sweep.axes = [{"name": "k_m", "min": 100.0, "max": 1e4, "count": 100, "spacing": "log"}]
        return config
    if name == "position-stiffness":
        config.params.sensing = "position"
        config.sweep.axes = [{"name": "k_s", "min": 10.0, "max": 1000.0, "count": 100, "spacing": "log"}]
        return config
    raise ConfigError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}")


PRESETS = ("default", "velocity-radius", "force-stiffness", "position-stiffness")


def load_config(path: str | Path | None = None, overrides: list[str] | tuple[str, ...] = ()) -> RunConfig:
    """Load a file (or a ``preset:<name>``), then apply overrides.

    Domain errors raised while building objects from the result are reported
    as configuration errors by the callers.
    """
    if path is None or str(path) == "":
        config = RunConfig()
    elif str(path).startswith("preset:"):
        config = preset(str(path)[len("preset:"):])
    else:
        config = RunConfig.load(path)
    return config.with_overrides(list(overrides)) if overrides else config


__all__ = [
    "ConfigError",
    "IoSection",
    "ModelSection",
    "MotorSection",
    "PRESETS",
    "ParamsSection",
    "RunConfig",
    "SimSection",
    "SweepSection",
    "load_config",
    "preset",
]
