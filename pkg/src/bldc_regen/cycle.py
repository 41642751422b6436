"""Speed-versus-time driving cycles with piecewise-linear interpolation."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from numba import njit

KPH = 1.0 / 3.6


class CycleError(ValueError):
    pass


class ParseError(CycleError):
    pass


class ValidationError(CycleError):
    pass


@dataclass(frozen=True)
class DriveCycle:
    times: tuple[float, ...]
    speeds: tuple[float, ...]
    """m/s"""
    name: str = "cycle"

    def __post_init__(self):
        if len(self.times) != len(self.speeds):
            raise ValidationError("times and speeds differ in length")
        if len(self.times) < 2:
            raise ValidationError("a cycle needs at least two samples")
        for k, (t, v) in enumerate(zip(self.times, self.speeds)):
            if not (math.isfinite(t) and math.isfinite(v)):
                raise ValidationError(f"sample {k}: non-finite value")
            if v < 0:
                raise ValidationError(f"sample {k}: negative speed {v}")
            if k and t <= self.times[k - 1]:
                raise ValidationError(f"sample {k}: time {t} not after {self.times[k - 1]}")

    @property
    def duration(self) -> float:
        return self.times[-1] - self.times[0]

    @property
    def peak_speed(self) -> float:
        return max(self.speeds)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.times, dtype=float), np.asarray(self.speeds, dtype=float)

    def speed_at(self, t: float) -> float:
        tt, vv = self.arrays()
        return interp_speed(tt, vv, t)

    def accel_at(self, t: float) -> float:
        tt, vv = self.arrays()
        return segment_slope(tt, vv, t)


@njit(cache=True)
def _segment(times, t):
    # right-continuous: a knot belongs to the segment that starts there
    n = times.shape[0]
    j = np.searchsorted(times, t, side="right") - 1
    if j < 0:
        return -1
    if j >= n - 1:
        return n - 1
    return j


@njit(cache=True)
def interp_speed(times, speeds, t):
    j = _segment(times, t)
    if j < 0:
        return speeds[0]
    if j >= times.shape[0] - 1:
        return speeds[-1]
    w = (t - times[j]) / (times[j + 1] - times[j])
    return speeds[j] + w * (speeds[j + 1] - speeds[j])


@njit(cache=True)
def segment_slope(times, speeds, t):
    j = _segment(times, t)
    if j < 0 or j >= times.shape[0] - 1:
        return 0.0
    return (speeds[j + 1] - speeds[j]) / (times[j + 1] - times[j])


def speed_at(cycle: DriveCycle, t: float) -> float:
    """Linearly interpolated speed (m/s), held at the end values outside the cycle."""
    return cycle.speed_at(t)


def accel_at(cycle: DriveCycle, t: float) -> float:
    """Slope of the active segment (m/s^2); on a knot the segment to the right wins."""
    return cycle.accel_at(t)


def parse_cycle(text: str, name: str = "cycle") -> DriveCycle:
    """Parse ``time_s,speed_mps`` or ``time_s,speed_kph`` CSV text."""
    reader = csv.reader(io.StringIO(text))
    rows = [(n, r) for n, r in enumerate(reader, start=1) if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError(f"{name}: empty cycle file")
    header = [c.strip() for c in rows[0][1]]
    if len(header) != 2 or header[0] != "time_s" or header[1] not in ("speed_mps", "speed_kph"):
        raise ParseError(f"{name}: line {rows[0][0]}: header must be time_s,speed_mps "
                         f"or time_s,speed_kph, got {','.join(header)}")
    scale = KPH if header[1] == "speed_kph" else 1.0
    times, speeds = [], []
    for line, row in rows[1:]:
        if len(row) != 2:
            raise ParseError(f"{name}: line {line}: expected 2 columns, got {len(row)}")
        try:
            t, v = float(row[0]), float(row[1])
        except ValueError:
            raise ParseError(f"{name}: line {line}: non-numeric value in {row}") from None
        times.append(t)
        speeds.append(v * scale)
    try:
        return DriveCycle(tuple(times), tuple(speeds), name)
    except ValidationError as exc:
        raise ValidationError(f"{name}: {exc} (data row numbering from 0)") from None


def load_cycle(source: str | os.PathLike) -> DriveCycle:
    """Load a cycle from a path, a bundled name (``ece15``) or literal CSV text."""
    if isinstance(source, str) and "\n" in source:
        return parse_cycle(source)
    path = Path(source)
    if not path.exists() and not path.suffix:
        bundled = resources.files("bldc_regen") / "data" / f"{path.name}.csv"
        if bundled.is_file():
            return parse_cycle(bundled.read_text(), path.name)
    if not path.exists():
        raise FileNotFoundError(f"cycle file not found: {path}")
    return parse_cycle(path.read_text(), path.stem)


def dump_cycle(cycle: DriveCycle) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["time_s", "speed_mps"])
    for t, v in zip(cycle.times, cycle.speeds):
        w.writerow([repr(float(t)), repr(float(v))])
    return out.getvalue()


def ece15() -> DriveCycle:
    return load_cycle("ece15")


def trapezoid(cruise: float, t_accel: float, t_cruise: float, t_decel: float,
              t_idle: float = 0.0, name: str = "trapezoid") -> DriveCycle:
    """Idle, ramp up, cruise, ramp down, idle."""
    knots = [(0.0, 0.0)]
    t = 0.0
    if t_idle > 0:
        t += t_idle
        knots.append((t, 0.0))
    t += t_accel
    knots.append((t, cruise))
    if t_cruise > 0:
        t += t_cruise
        knots.append((t, cruise))
    t += t_decel
    knots.append((t, 0.0))
    if t_idle > 0:
        t += t_idle
        knots.append((t, 0.0))
    return DriveCycle(tuple(k[0] for k in knots), tuple(k[1] for k in knots), name)
