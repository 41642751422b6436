"""Scenario files: TOML sections of ``key = value`` pairs mapped onto dataclasses.

Sections: ``[sim]``, ``[cycle]``, ``[motor]``, ``[vehicle]``, ``[road]``,
``[battery]``, ``[dtc]``, ``[speed]`` and ``[mras]``.  Every key is optional
and falls back to the dataclass default; unknown sections or keys are
rejected.  See ``README.md`` for the full key list.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .battery import BatteryState
from .cycle import DriveCycle, KPH, load_cycle
from .dtc import DtcConfig, Mode
from .motor import MotorParams
from .vehicle import VehicleParams


class ConfigError(ValueError):
    pass


class UnknownKey(ConfigError):
    pass


class TypeMismatch(ConfigError):
    pass


@dataclass(frozen=True)
class SimConfig:
    name: str = "scenario"
    dt_electrical: float = 1e-5
    dt_control: float = 5e-5
    duration: float = 0.0
    """0 runs the whole cycle"""
    theta0: float = 0.0
    """initial electrical rotor angle (rad)"""
    seed: int = 0
    """reserved; runs are deterministic"""

    def __post_init__(self):
        if not (self.dt_electrical > 0 and self.dt_control > 0):
            raise ConfigError("time steps must be positive")
        if self.dt_control < self.dt_electrical:
            raise ConfigError("dt_control must be >= dt_electrical")
        ratio = self.dt_control / self.dt_electrical
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ConfigError("dt_control must be an integer multiple of dt_electrical")
        if self.duration < 0:
            raise ConfigError("duration must be >= 0")

    @property
    def substeps(self) -> int:
        return int(round(self.dt_control / self.dt_electrical))


@dataclass(frozen=True)
class CycleConfig:
    builtin: str = ""
    file: str = ""
    time_s: tuple = ()
    speed_mps: tuple = ()
    speed_kph: tuple = ()

    def build(self, base: Path | None = None) -> DriveCycle:
        given = [bool(self.builtin), bool(self.file), bool(self.time_s)]
        if sum(given) != 1:
            raise ConfigError("[cycle] needs exactly one of builtin, file or time_s/speed lists")
        if self.builtin:
            return load_cycle(self.builtin)
        if self.file:
            path = Path(self.file)
            if base is not None and not path.is_absolute():
                path = base / path
            return load_cycle(path)
        if bool(self.speed_mps) == bool(self.speed_kph):
            raise ConfigError("[cycle] inline knots need speed_mps or speed_kph (not both)")
        speeds = self.speed_mps or tuple(v * KPH for v in self.speed_kph)
        return DriveCycle(tuple(float(t) for t in self.time_s), tuple(float(v) for v in speeds),
                          "inline")


@dataclass(frozen=True)
class RoadConfig:
    slope: float = 0.0
    inertia: str = "reflected"
    """``reflected``: vehicle mass is shaft inertia; ``commanded``: mass times the
    cycle acceleration is applied as load torque"""

    def __post_init__(self):
        if self.inertia not in ("reflected", "commanded"):
            raise ConfigError("road.inertia must be 'reflected' or 'commanded'")
        if not abs(self.slope) < math.pi / 2:
            raise ConfigError("road.slope must be within (-pi/2, pi/2)")


@dataclass(frozen=True)
class SpeedConfig:
    controller: str = "pi"
    kp: float = 10.0
    """PI proportional gain (N m per rad/s)"""
    ki: float = 6.0
    torque_limit: float = 30.0

    def __post_init__(self):
        if self.controller not in ("pi", "mras"):
            raise ConfigError("speed.controller must be 'pi' or 'mras'")
        if self.torque_limit <= 0:
            raise ConfigError("speed.torque_limit must be positive")


@dataclass(frozen=True)
class MrasConfig:
    gamma: float = -1.0
    """adaptation gain; negative selects gamma0 / (peak model output)^2"""
    gamma0: float = 0.1
    kp_init: float = 1.0
    kp_min: float = 0.5
    kp_max: float = 2.0
    model_gain: float = -1.0
    """b_m; negative gives unit DC gain (b_m = denom_const_coeff)"""
    denom_s_coeff: float = -1.0
    denom_const_coeff: float = -1.0
    placement: str = "standard"
    """used when the coefficients are derived from the motor (negative values)"""
    speed_limit: float = 1000.0
    """clamp on the adapted speed command (rad/s)"""

    def __post_init__(self):
        if self.placement not in ("standard", "as_printed"):
            raise ConfigError("mras.placement must be 'standard' or 'as_printed'")
        if self.kp_min > self.kp_max:
            raise ConfigError("mras.kp_min exceeds kp_max")
        if (self.denom_s_coeff < 0) != (self.denom_const_coeff < 0):
            raise ConfigError("set both denominator coefficients or neither")
        if self.denom_s_coeff == 0 or self.denom_const_coeff == 0:
            raise ConfigError("reference model denominator must be Hurwitz")


@dataclass(frozen=True)
class Scenario:
    sim: SimConfig = field(default_factory=SimConfig)
    cycle: CycleConfig = field(default_factory=lambda: CycleConfig(builtin="ece15"))
    motor: MotorParams = field(default_factory=MotorParams)
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    road: RoadConfig = field(default_factory=RoadConfig)
    battery: BatteryState = field(default_factory=BatteryState)
    dtc: DtcConfig = field(default_factory=DtcConfig)
    speed: SpeedConfig = field(default_factory=SpeedConfig)
    mras: MrasConfig = field(default_factory=MrasConfig)
    base_dir: str = ""
    """directory for resolving relative cycle paths (not a file key)"""

    def drive_cycle(self) -> DriveCycle:
        return self.cycle.build(Path(self.base_dir) if self.base_dir else None)


SECTIONS = ("sim", "cycle", "motor", "vehicle", "road", "battery", "dtc", "speed", "mras")


def _coerce(section: str, key: str, default: Any, value: Any) -> Any:
    where = f"{section}.{key}"
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false"):
            return value.lower() == "true"
        raise TypeMismatch(f"{where}: expected a boolean, got {value!r}")
    if isinstance(default, Mode):
        try:
            return Mode.parse(value)
        except ValueError as exc:
            raise TypeMismatch(f"{where}: {exc}") from None
    if isinstance(default, int):
        if isinstance(value, bool):
            raise TypeMismatch(f"{where}: expected an integer, got {value!r}")
        if isinstance(value, int):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
        if isinstance(value, str):
            try:
                return int(value)
            except ValueError:
                pass
        raise TypeMismatch(f"{where}: expected an integer, got {value!r}")
    if isinstance(default, float):
        if isinstance(value, bool):
            raise TypeMismatch(f"{where}: expected a number, got {value!r}")
        if isinstance(value, (int, float)):
            return float(value)
        if isinstance(value, str):
            try:
                return float(value)
            except ValueError:
                pass
        raise TypeMismatch(f"{where}: expected a number, got {value!r}")
    if isinstance(default, str):
        if isinstance(value, str):
            return value
        raise TypeMismatch(f"{where}: expected a string, got {value!r}")
    if isinstance(default, tuple):
        if isinstance(value, str):
            value = [v for v in value.replace(";", ",").split(",") if v.strip()]
        if not isinstance(value, (list, tuple)):
            raise TypeMismatch(f"{where}: expected a list, got {value!r}")
        try:
            return tuple(float(v) for v in value)
        except (TypeError, ValueError):
            raise TypeMismatch(f"{where}: expected a list of numbers") from None
    raise TypeMismatch(f"{where}: unsupported field type")  # pragma: no cover


def _section_from_dict(name: str, obj: Any, values: dict) -> Any:
    known = {f.name: f for f in fields(obj)}
    updates = {}
    for key, value in values.items():
        if key not in known:
            raise UnknownKey(f"unknown key {name}.{key}")
        updates[key] = _coerce(name, key, getattr(obj, key), value)
    try:
        return replace(obj, **updates)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[{name}] {exc}") from None


def scenario_from_dict(data: dict, base_dir: str = "") -> Scenario:
    sc = Scenario(base_dir=base_dir)
    updates = {}
    for name, values in data.items():
        if name not in SECTIONS:
            raise UnknownKey(f"unknown section [{name}]")
        if not isinstance(values, dict):
            raise ConfigError(f"[{name}] must be a table of key = value pairs")
        # a [cycle] table replaces the default cycle rather than adding to it
        start = CycleConfig() if name == "cycle" else getattr(sc, name)
        updates[name] = _section_from_dict(name, start, values)
    return replace(sc, **updates)


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"scenario file not found: {path}")
    try:
        data = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    sc = scenario_from_dict(data, str(path.resolve().parent))
    if sc.sim.name == "scenario":
        sc = replace(sc, sim=replace(sc.sim, name=path.stem))
    return sc


def parse_override(text: str) -> tuple[str, str, str]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not KEY=VALUE")
    key, value = text.split("=", 1)
    parts = key.strip().split(".")
    if len(parts) != 2:
        raise UnknownKey(f"override key {key!r} must be section.key")
    return parts[0], parts[1], value.strip()


def apply_overrides(scenario: Scenario, overrides: list[str] | dict[str, Any]) -> Scenario:
    """Replace ``section.key`` values with type checking.

    Keys of one section are applied together, so paired settings validate as a set.
    """
    items = overrides.items() if isinstance(overrides, dict) else [
        (f"{s}.{k}", v) for s, k, v in map(parse_override, overrides)]
    grouped: dict[str, dict] = {}
    for dotted, value in items:
        section, _, key = dotted.partition(".")
        if section not in SECTIONS:
            raise UnknownKey(f"unknown key {dotted}")
        sec = getattr(scenario, section)
        if key not in {f.name for f in fields(sec)}:
            raise UnknownKey(f"unknown key {dotted}")
        if isinstance(value, str) and isinstance(getattr(sec, key), str):
            value = value.strip('"').strip("'")
        grouped.setdefault(section, {})[key] = value
    for section, values in grouped.items():
        sec = getattr(scenario, section)
        scenario = replace(scenario, **{section: _section_from_dict(section, sec, values)})
    return scenario


def _plain(v: Any) -> Any:
    return v.name.lower() if isinstance(v, Mode) else v


def scenario_to_dict(scenario: Scenario) -> dict:
    out = {}
    for name in SECTIONS:
        sec = getattr(scenario, name)
        out[name] = {f.name: _plain(getattr(sec, f.name)) for f in fields(sec)}
    return out


def dump_scenario(scenario: Scenario) -> str:
    """TOML text of every key (round-trips through :func:`scenario_from_dict`)."""
    lines = []
    for name, values in scenario_to_dict(scenario).items():
        lines.append(f"[{name}]")
        for key, v in values.items():
            if isinstance(v, bool):
                text = "true" if v else "false"
            elif isinstance(v, str):
                text = '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
            elif isinstance(v, tuple):
                text = "[" + ", ".join(repr(float(x)) for x in v) + "]"
            elif isinstance(v, float):
                text = repr(v) if math.isfinite(v) else ("inf" if v > 0 else "-inf")
            else:
                text = str(v)
            lines.append(f"{key} = {text}")
        lines.append("")
    return "\n".join(lines)
