#!/usr/bin/env python3
import csv
import json
import logging
import math
import re
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import fire
import numpy as np

from .config import load_config
from .errors import ConfigError, ReflexDomainError, ReflexError, TraceParseError
from .forcetrace import read_trace, write_trace
from .manipulator import (
    Configuration,
    dme,
    effective_mass,
    ellipsoid_axes,
    forward_kinematics,
    gie,
    imf,
    jacobian,
    reflex_surface,
    SURFACE_COLUMNS,
)
from .reflex import (
    bandwidths,
    minimum_impulse,
    minimum_impulse_closed_form,
    numerical_optimal_velocity,
    optimal_velocity,
    sweep,
    total_impulse,
)
from .scaling import force_capability_at_link, law_by_name, reflected_mass_at_link, scale_motor
from .sim import simulate, validate_batch
from .tracelab import fit_trace, integrate_trace, segment_trace

logger = logging.getLogger(__name__)

PROG = "collision_reflex"

# Splits "a.b=1,c.d=[1,2]" between overrides without breaking JSON lists.
_OVERRIDE_SPLIT = re.compile(r",(?=\s*[A-Za-z_]\w*\.\w+=)")


def _jsonable(value: Any) -> Any:
    """Replace non-finite floats with ``None`` and numpy scalars with Python ones."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _overrides(raw: Any) -> list[str]:
    if raw is None or raw == "":
        return []
    if isinstance(raw, (list, tuple)):
        items: list[str] = []
        for item in raw:
            items.extend(_overrides(item))
        return items
    return [part.strip() for part in _OVERRIDE_SPLIT.split(str(raw)) if part.strip()]


class ReflexCLI:
    """Compute and validate the collision reflex metric of robots.

    Global flags go before or after the subcommand.

    Args:
        config (str, optional): RunConfig JSON file, or preset:<name>.
        set (str, optional): section.key=value overrides, comma separated.
        out (str, optional): Output file; .csv or .json. Defaults to JSON on stdout.
        verbose (bool, optional): Show progress and INFO logging. Defaults to False.
        seed (int, optional): Random seed for noise and randomized batches.
    """

    def __init__(
        self,
        config: str = "",
        set: Any = (),  # noqa: A002
        out: str = "",
        verbose: bool = False,
        seed: int | None = None,
    ) -> None:
        logging.basicConfig(
            level=logging.INFO if verbose else logging.WARNING,
            format="%(levelname)s: %(message)s",
            force=True,
        )
        self._verbose = bool(verbose)
        self._cfg = load_config(str(config) if config else None, _overrides(set))
        if out:
            self._cfg.io.out = str(out)
        if seed is not None:
            if isinstance(seed, bool) or not isinstance(seed, int):
                raise ConfigError(f"--seed must be an integer, got {seed!r}")
            self._cfg.io.seed = seed

    # Output

    def _emit(
        self,
        payload: dict[str, Any],
        columns: Sequence[str] | None = None,
        rows: list[list[Any]] | None = None,
    ) -> None:
        out = self._cfg.io.out
        text = json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"
        if not out:
            sys.stdout.write(text)
            return
        path = Path(out)
        fmt = self._cfg.io.format
        if fmt == "auto":
            fmt = path.suffix.lower().lstrip(".")
        if fmt == "json":
            logger.info(f"Saving {path}...")
            path.write_text(text, encoding="utf-8")
        elif fmt == "csv":
            if columns is None or rows is None:
                raise ConfigError("this command has no tabular output; use a .json file")
            logger.info(f"Saving {path}...")
            with path.open("w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(columns)
                for row in rows:
                    writer.writerow(
                        f"{v:.9g}" if isinstance(v, float) else ("" if v is None else v) for v in row
                    )
        else:
            raise ConfigError(f"cannot tell the output format of {out!r}; use .csv or .json")
        print(f"Output saved to: {path}")

    def _trace_path(self, trace: str | None) -> str:
        path = str(trace) if trace else self._cfg.io.trace
        if not path:
            raise ConfigError("no trace given; pass --trace or set io.trace")
        return path

    # Subcommands

    def impulse(self) -> None:
        """Per-phase and total impulse of the configured collision."""
        params = self._cfg.params.build()
        self._emit({"params": params.to_dict(), "breakdown": total_impulse(params).to_dict()})

    def vstar(self) -> None:
        """Optimal pre-impact velocity and the minimum impulse."""
        params = self._cfg.params.build()
        v_star = optimal_velocity(params.F_s, params.k, params.m_f)
        omega_s, omega_a = bandwidths(params)
        self._emit({
            "v_star": v_star,
            "v_star_numerical": numerical_optimal_velocity(params),
            "minimum_impulse": minimum_impulse(params),
            "minimum_impulse_closed_form": minimum_impulse_closed_form(params),
            "omega_s": omega_s,
            "omega_a": omega_a,
            "breakdown_at_v_star": total_impulse(params.replace(v_0=v_star)).to_dict(),
        })

    def sweep(self) -> None:
        """Total impulse over the configured one- or two-axis grid."""
        grid = self._cfg.sweep.build(self._cfg.params.build())
        source = self._cfg.motor.sweep_source() if any(a.name == "r" for a in grid.axes) else None
        table = sweep(grid, motor_source=source, verbose=self._verbose)
        best = table.argmin
        self._emit(
            {
                "columns": table.columns,
                "rows": table.records(),
                "argmin": best,
                "minimum": table.rows[best].values() if best is not None else None,
            },
            table.columns,
            table.records(),
        )

    def scale_motor(self, r_mm: float | None = None, law: str | None = None, torque_floor: float | None = None) -> None:
        """Scale the reference motor to a new stator size.

        Args:
            r_mm (float, optional): New size in millimetres. Defaults to the reference size.
            law (str, optional): Motor scaling law. Defaults to motor.law.
            torque_floor (float, optional): Minimum output torque, N·m. Defaults to motor.torque_floor.
        """
        section = self._cfg.motor
        reference = section.reference_motor()
        r_new = reference.r if r_mm is None else float(r_mm) / 1000.0
        chosen = section.scaling_law() if law is None else law_by_name(law)
        floor = section.torque_floor if torque_floor is None else float(torque_floor)
        motor = scale_motor(reference, r_new, chosen, floor)
        self._emit({
            "reference": reference.to_dict(),
            "law": chosen.to_dict(),
            "motor": motor.to_dict(derived=True),
            "link_length": section.link_length,
            "reflected_mass_at_link": reflected_mass_at_link(motor, section.link_length),
            "force_at_link": force_capability_at_link(motor, section.link_length),
        })

    def _configuration(self, q1_deg: float | None, q2_deg: float | None) -> Configuration:
        q = self._cfg.model.configuration()
        q1 = q.q1 if q1_deg is None else math.radians(float(q1_deg))
        q2 = q.q2 if q2_deg is None else math.radians(float(q2_deg))
        return Configuration(q1, q2)

    def surface(
        self,
        q2_deg: float | None = None,
        q1_deg: float | None = None,
        v0: float | None = None,
        n: int | None = None,
    ) -> None:
        """Total impulse for collision directions around the end effector.

        Args:
            q2_deg (float, optional): Elbow angle in degrees. Defaults to model.q2.
            q1_deg (float, optional): Shoulder angle in degrees. Defaults to model.q1.
            v0 (float, optional): Pre-impact speed, m/s. Defaults to params.v_0.
            n (int, optional): Number of directions. Defaults to model.n.
        """
        model_cfg = self._cfg.model
        params = self._cfg.params.build()
        q = self._configuration(q1_deg, q2_deg)
        surface = reflex_surface(
            model_cfg.build(),
            q,
            v_0=params.v_0 if v0 is None else float(v0),
            F_s=params.F_s,
            n=model_cfg.n if n is None else int(n),
            series_with_contact=model_cfg.series_with_contact,
            saturation=model_cfg.saturation,  # type: ignore[arg-type]
            verbose=self._verbose,
        )
        totals = surface.totals
        finite = totals[np.isfinite(totals)]
        rows = surface.records()
        self._emit(
            {
                "q1": q.q1,
                "q2": q.q2,
                "n": len(rows),
                "min_total": float(finite.min()) if finite.size else None,
                "max_total": float(finite.max()) if finite.size else None,
                "columns": list(SURFACE_COLUMNS),
                "rows": rows,
            },
            SURFACE_COLUMNS,
            rows,
        )

    def metrics(
        self, q2_deg: float | None = None, q1_deg: float | None = None, theta_deg: float = 0.0
    ) -> None:
        """Inertia ellipsoids, IMF and effective masses at a configuration.

        Args:
            q2_deg (float, optional): Elbow angle in degrees. Defaults to model.q2.
            q1_deg (float, optional): Shoulder angle in degrees. Defaults to model.q1.
            theta_deg (float, optional): Direction of the effective masses in degrees. Defaults to 0.
        """
        model = self._cfg.model.build()
        q = self._configuration(q1_deg, q2_deg)
        theta = math.radians(float(theta_deg))
        u = (math.cos(theta), math.sin(theta))
        elbow, tip = forward_kinematics(model, q)
        ellipsoid = gie(model, q)
        lengths, directions = ellipsoid_axes(ellipsoid)
        self._emit({
            "q1": q.q1,
            "q2": q.q2,
            "elbow": elbow,
            "end_effector": tip,
            "jacobian": jacobian(model, q),
            "gie": ellipsoid,
            "gie_axes": {"lengths": lengths, "directions": directions.T},
            "dme": dme(model, q),
            "imf": imf(model, q),
            "theta": theta,
            "effective_mass": {
                selector: effective_mass(model, q, u, selector)  # type: ignore[arg-type]
                for selector in ("structure", "actuators", "full")
            },
        })

    def simulate(self) -> None:
        """Simulate the configured collision; a .csv output receives the trace."""
        opt = self._cfg.sim.build(self._cfg.io.seed)
        result = simulate(self._cfg.params.build(), opt)
        trace = result.trace
        out = self._cfg.io.out
        payload = {
            "events": vars(result.events),
            "breakdown": result.breakdown.to_dict(),
            "finger_velocity": result.finger_velocity,
            "samples": len(trace),
        }
        if out and Path(out).suffix.lower() == ".csv":
            write_trace(trace, out)
            print(f"Output saved to: {out}")
            return
        self._emit(payload)

    def integrate(self, trace: str | None = None, method: str | None = None) -> None:
        """Impulse of a force trace.

        Args:
            trace (str, optional): Trace CSV with header t_s,force_n. Defaults to io.trace.
            method (str, optional): trapezoid or gauss-kronrod. Defaults to io.integration.
        """
        data = read_trace(self._trace_path(trace))
        chosen = method or self._cfg.io.integration
        self._emit({
            "trace": data.source,
            "samples": len(data),
            "method": chosen,
            "impulse": integrate_trace(data, chosen),
        })

    def segment(self, trace: str | None = None) -> None:
        """Contact, detection and release times of a force trace."""
        data = read_trace(self._trace_path(trace))
        self._emit(segment_trace(data).to_dict())

    def fit(self, trace: str | None = None, v0: float | None = None, k_m: float = 2e7) -> None:
        """One-shot model fit of a force trace.

        Args:
            trace (str, optional): Trace CSV. Defaults to io.trace.
            v0 (float, optional): Known pre-impact speed, m/s. Defaults to params.v_0.
            k_m (float, optional): Fixed mechanical stiffness, N/m. Defaults to 2e7.
        """
        data = read_trace(self._trace_path(trace))
        v_0 = self._cfg.params.v_0 if v0 is None else float(v0)
        self._emit(fit_trace(data, k_m=float(k_m), v_0=v_0).to_dict())

    def validate(self, n: int | None = None, tolerance: float | None = None) -> None:
        """Closed-form impulse against the simulation on randomized collisions.

        Args:
            n (int, optional): Number of parameter sets. Defaults to sim.batch.
            tolerance (float, optional): Relative tolerance. Defaults to sim.tolerance.
        """
        sim = self._cfg.sim
        report = validate_batch(
            n=sim.batch if n is None else int(n),
            seed=self._cfg.io.seed,
            opt=sim.build(self._cfg.io.seed),
            tolerance=sim.tolerance if tolerance is None else float(tolerance),
            verbose=self._verbose,
        )
        columns = ["closed_form_ns", "simulated_ns", "rel_error"]
        rows = [[r.closed_form, r.simulated, r.rel_error] for r in report.rows]
        self._emit(report.to_dict(), columns, rows)
        if not report.passed:
            raise ReflexDomainError(
                f"closed form and simulation differ by {report.max_rel_error:.3%} "
                f"(tolerance {report.tolerance:.3%})"
            )

    def config(self) -> None:
        """Print or save the effective configuration."""
        out = self._cfg.io.out
        if out:
            self._cfg.dump(out)
            print(f"Output saved to: {out}")
            return
        sys.stdout.write(self._cfg.dumps())


def _usage_message(error: BaseException) -> str:
    """Error text of a fire usage failure, without fire's usage block."""
    trace = getattr(error, "trace", None)
    try:
        return trace.elements[-1].ErrorAsStr()  # type: ignore[union-attr]
    except (AttributeError, IndexError):
        return "invalid command line; see --help"


def _fail(code: str, exit_code: int, error: BaseException | str) -> int:
    message = " ".join(str(error).split())
    print(f"error: {code}: {message}", file=sys.stderr)
    return exit_code


def run(argv: Sequence[str] | None = None) -> int:
    """Run one subcommand and return the process exit code.

    0 on success, 1 on domain errors, 2 on usage or configuration errors and
    3 on I/O or trace parse errors.
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    fire.core.Display = lambda lines, out: print(*lines, file=out)
    try:
        fire.Fire(ReflexCLI, command=argv, name=PROG)
    except fire.core.FireExit as e:
        if e.code in (0, None):
            return 0
        return _fail("usage", 2, _usage_message(e))
    except ConfigError as e:
        logger.debug("Configuration error", exc_info=True)
        return _fail("usage", 2, e)
    except (TraceParseError, OSError) as e:
        logger.debug("I/O error", exc_info=True)
        return _fail("io", 3, e)
    except ReflexError as e:
        logger.debug("Domain error", exc_info=True)
        return _fail("domain", 1, e)
    return 0


def cli() -> None:
    sys.exit(run())


if __name__ == "__main__":
    cli()
