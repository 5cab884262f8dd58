"""Force-time traces and their CSV representation."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .errors import ReflexDomainError, TraceParseError

logger = logging.getLogger(__name__)

HEADER = ("t_s", "force_n")
#: Minimum number of samples for integration, segmentation and fitting.
MIN_SAMPLES = 8


@dataclass(frozen=True, eq=False)
class ForceTrace:
    """Sampled contact force. Times must be strictly increasing."""

    t: NDArray[np.float64]
    force: NDArray[np.float64]
    source: str = ""
    sample_rate: float | None = field(default=None)

    def __post_init__(self) -> None:
        t = np.asarray(self.t, dtype=float)
        force = np.asarray(self.force, dtype=float)
        if t.ndim != 1 or t.shape != force.shape:
            raise ReflexDomainError(f"t and force must be 1-D of equal length, got {t.shape} and {force.shape}")
        if t.size == 0:
            raise ReflexDomainError("a trace needs at least one sample")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(force))):
            raise ReflexDomainError("trace contains non-finite values")
        if np.any(np.diff(t) <= 0):
            raise ReflexDomainError("trace times must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "force", force)
        if self.sample_rate is None and t.size > 1:
            object.__setattr__(self, "sample_rate", float(1.0 / np.median(np.diff(t))))

    def __len__(self) -> int:
        return int(self.t.size)

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    def scaled(self, factor: float) -> ForceTrace:
        return ForceTrace(self.t, self.force * factor, self.source, self.sample_rate)

    def with_noise(self, sigma: float, seed: int) -> ForceTrace:
        """Copy with seeded white Gaussian noise of standard deviation ``sigma`` added."""
        if sigma < 0:
            raise ReflexDomainError(f"noise sigma must be >= 0, got {sigma}")
        if sigma == 0:
            return self
        rng = np.random.default_rng(seed)
        noisy = self.force + rng.normal(0.0, sigma, size=self.force.shape)
        return ForceTrace(self.t, noisy, self.source, self.sample_rate)

    def require_analyzable(self) -> None:
        if len(self) < MIN_SAMPLES:
            raise ReflexDomainError(
                f"trace has {len(self)} samples, at least {MIN_SAMPLES} are needed"
            )


def read_trace(path: str | Path) -> ForceTrace:
    """Read a ``t_s,force_n`` CSV file.

    Raises:
        TraceParseError: with the 1-based line number of the offending row.
        FileNotFoundError: if the file does not exist.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"The trace file {path} does not exist.")
    logger.info(f"Reading {path}...")
    times: list[float] = []
    forces: list[float] = []
    with path.open("r", encoding="utf-8-sig", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(cell.strip() for cell in header) != HEADER:
            raise TraceParseError(f"expected header {','.join(HEADER)!r}, got {header!r}", line=1)
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 2:
                raise TraceParseError(f"expected 2 columns, got {len(row)}", line=line)
            try:
                t, force = float(row[0]), float(row[1])
            except ValueError as e:
                raise TraceParseError(f"non-numeric cell in {row!r}", line=line) from e
            if not (math.isfinite(t) and math.isfinite(force)):
                raise TraceParseError(f"non-finite value in {row!r}", line=line)
            if times and t <= times[-1]:
                raise TraceParseError(
                    f"time {t!r} does not increase (previous {times[-1]!r})", line=line
                )
            times.append(t)
            forces.append(force)
    if not times:
        raise TraceParseError("no samples after the header", line=2)
    return ForceTrace(np.array(times), np.array(forces), source=str(path))


def write_trace(trace: ForceTrace, path: str | Path) -> None:
    """Write a trace as ``t_s,force_n`` CSV with 9 significant digits."""
    path = Path(path)
    logger.info(f"Saving {path}...")
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HEADER)
        for t, force in zip(trace.t, trace.force):
            writer.writerow((f"{t:.9g}", f"{force:.9g}"))
