"""Direct torque control: flux/torque estimation, hysteresis comparators and switching tables.

Two tables are provided.  The conventional one has six printed rows and is
driven by a two-level torque comparator.  The modified (regenerative) one is
indexed torque-major and driven by a three-level comparator whose middle
level selects a zero vector.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from enum import IntEnum
from typing import Iterable, NamedTuple, TextIO

import numpy as np
from numba import njit

from .inverter import VECTOR_CODES, SwitchState, decode_vector
from .motor import MotorParams, clarke, rotor_flux_ab, torque_abc

TWO_PI = 2.0 * math.pi

#: alpha/beta angle of active vector V1 (A+ C-); V_k sits at this + (k-1)*60 deg
V1_ANGLE = math.pi / 6.0


class FluxCmd(IntEnum):
    FD = -1
    FI = 1


class TorqueCmd(IntEnum):
    TD = -1
    T0 = 0
    TI = 1


class Mode(IntEnum):
    CONVENTIONAL = 0
    MODIFIED = 1

    @classmethod
    def parse(cls, text: str | "Mode") -> "Mode":
        if isinstance(text, Mode):
            return text
        if isinstance(text, int) and not isinstance(text, bool) and text in (0, 1):
            return cls(text)
        try:
            return cls[str(text).upper()]
        except KeyError:
            raise ValueError(f"unknown DTC mode {text!r} (conventional or modified)") from None


# Printed rows of the conventional table.  Rows 3-4 have no flux label in
# print; they are carried as FI.  Lookup uses the first matching row.
CONVENTIONAL_ROWS = (
    (FluxCmd.FI, TorqueCmd.TI, (1, 2, 3, 4, 5, 6)),
    (FluxCmd.FI, TorqueCmd.TD, (6, 1, 2, 3, 4, 5)),
    (FluxCmd.FI, TorqueCmd.TI, (2, 3, 4, 5, 6, 1)),
    (FluxCmd.FI, TorqueCmd.TD, (1, 2, 3, 4, 5, 6)),
    (FluxCmd.FD, TorqueCmd.TI, (0, 0, 0, 0, 0, 0)),
    (FluxCmd.FD, TorqueCmd.TD, (2, 3, 4, 5, 6, 1)),
)

# Rows of the regenerative table, torque command first.  The (TD, FD, sector 5)
# cell is V6 as printed; the rotation rule V(k-2) used everywhere else gives V3.
MODIFIED_ROWS = (
    (TorqueCmd.TI, FluxCmd.FI, (2, 3, 4, 5, 6, 1)),
    (TorqueCmd.TI, FluxCmd.FD, (3, 4, 5, 6, 1, 2)),
    (TorqueCmd.T0, FluxCmd.FI, (0, 7, 0, 7, 0, 7)),
    (TorqueCmd.T0, FluxCmd.FD, (0, 7, 0, 7, 0, 7)),
    (TorqueCmd.TD, FluxCmd.FI, (6, 1, 2, 3, 4, 5)),
    (TorqueCmd.TD, FluxCmd.FD, (5, 6, 1, 2, 6, 4)),
)
PATCHED_CELL = (TorqueCmd.TD, FluxCmd.FD, 5, 3)


def _flux_index(f) -> int:
    return 0 if f == FluxCmd.FI else 1


def _torque_index(t) -> int:
    return {TorqueCmd.TI: 0, TorqueCmd.T0: 1, TorqueCmd.TD: 2}[TorqueCmd(t)]


# The two FD rows with their torque labels exchanged: the zero vector then
# serves torque decrease and V(k+1) torque increase, matching the FI rows.
SWAPPED_ROWS = {(FluxCmd.FD, TorqueCmd.TI): (2, 3, 4, 5, 6, 1),
                (FluxCmd.FD, TorqueCmd.TD): (0, 0, 0, 0, 0, 0)}


def conventional_rows(patched: bool = False) -> tuple:
    if not patched:
        return CONVENTIONAL_ROWS
    return tuple((f, t, SWAPPED_ROWS.get((f, t), row)) for f, t, row in CONVENTIONAL_ROWS)


def _build_conventional(patched: bool) -> np.ndarray:
    table = np.full((2, 2, 6), -1, dtype=np.int64)
    for f, t, row in conventional_rows(patched):
        cell = table[_flux_index(f), 0 if t == TorqueCmd.TI else 1]
        if cell[0] < 0:
            cell[:] = row
    return table


def _build_modified(patched: bool) -> np.ndarray:
    table = np.empty((3, 2, 6), dtype=np.int64)
    for t, f, row in MODIFIED_ROWS:
        table[_torque_index(t), _flux_index(f)] = row
    if patched:
        t, f, k, v = PATCHED_CELL
        table[_torque_index(t), _flux_index(f), k - 1] = v
    return table


CONVENTIONAL_TABLE = _build_conventional(False)
CONVENTIONAL_TABLE_PATCHED = _build_conventional(True)
MODIFIED_TABLE = _build_modified(False)
MODIFIED_TABLE_PATCHED = _build_modified(True)


# ---------------------------------------------------------------------------
# compiled kernels


@njit(cache=True)
def sector_index(angle):
    deg = math.degrees(angle) % 360.0
    k = int(math.floor((deg + 30.0) / 60.0 + 1e-12)) % 6
    return k + 1


@njit(cache=True)
def flux_comparator(err, band, prev):
    if err > band:
        return 1
    if err < -band:
        return -1
    return prev


@njit(cache=True)
def torque_comparator3(err, band, inner, prev):
    if err > band:
        return 1
    if err < -band:
        return -1
    if prev == 1 and err > inner:
        return 1
    if prev == -1 and err < -inner:
        return -1
    return 0


@njit(cache=True)
def lookup(conv, mod, mode, f, t, k):
    fi = 0 if f == 1 else 1
    if mode == 0:
        return conv[fi, 0 if t == 1 else 1, k - 1]
    ti = 0 if t == 1 else (1 if t == 0 else 2)
    return mod[ti, fi, k - 1]


@njit(cache=True)
def sector_offset(mode):
    """Conventional sectors are straddled by V_{k-1} and V_k; modified sectors are
    centred on V_k, which is what the k+1 / k+2 rotation pattern assumes."""
    return 0.0 if mode == 0 else V1_ANGLE


@njit(cache=True)
def decide(conv, mod, mode, psi_a, psi_b, psi_ref, torque_est, torque_ref,
           flux_band, torque_band, torque_inner, prev_f, prev_t):
    """Comparators, sector and table lookup for one control period."""
    mag = math.sqrt(psi_a * psi_a + psi_b * psi_b)
    f = flux_comparator(psi_ref - mag, flux_band, prev_f)
    t_err = torque_ref - torque_est
    if mode == 0:
        # two-level comparator; T0 from a previous run is treated as "hold nothing"
        t = flux_comparator(t_err, torque_band, prev_t if prev_t != 0 else 1)
    else:
        t = torque_comparator3(t_err, torque_band, torque_inner, prev_t)
    k = sector_index(math.atan2(psi_b, psi_a) - sector_offset(mode))
    return lookup(conv, mod, mode, f, t, k), f, t, k


# ---------------------------------------------------------------------------
# library surface


@dataclass(frozen=True)
class FluxEstimate:
    psi_alpha: float = 0.0
    psi_beta: float = 0.0

    @property
    def magnitude(self) -> float:
        return math.hypot(self.psi_alpha, self.psi_beta)

    @property
    def angle(self) -> float:
        return math.atan2(self.psi_beta, self.psi_alpha)


@dataclass(frozen=True)
class HysteresisState:
    flux_band: float
    torque_band: float
    torque_inner: float = 0.0
    last_flux: FluxCmd = FluxCmd.FI
    last_torque: TorqueCmd = TorqueCmd.T0

    def __post_init__(self):
        if self.flux_band <= 0 or self.torque_band <= 0:
            raise ValueError("hysteresis bands must be positive")
        if not 0.0 <= self.torque_inner <= self.torque_band:
            raise ValueError("torque_inner must lie in [0, torque_band]")


def estimate_flux(prev: FluxEstimate, v_alphabeta: tuple[float, float],
                  i_alphabeta: tuple[float, float], resistance: float, dt: float,
                  leakage: float = 0.0) -> FluxEstimate:
    """Voltage-model flux integrator ``psi += (v - R i - leakage * psi) dt``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    va, vb = v_alphabeta
    ia, ib = i_alphabeta
    return FluxEstimate(
        prev.psi_alpha + (va - resistance * ia - leakage * prev.psi_alpha) * dt,
        prev.psi_beta + (vb - resistance * ib - leakage * prev.psi_beta) * dt,
    )


def sector_of(angle: float) -> int:
    """Sector 1..6 of an angle; sector 1 is [-30, 30) degrees, counterclockwise."""
    return sector_index(angle)


def flux_sector(flux: FluxEstimate, mode: Mode | str = Mode.MODIFIED) -> int:
    """Sector of a stator flux vector as each switching table expects it.

    Conventional: :func:`sector_of` applied directly, so V_{k-1} and V_k sit at
    the sector edges.  Modified: sector k is centred on active vector V_k.
    """
    return sector_index(flux.angle - sector_offset(int(Mode.parse(mode))))


def flux_hysteresis(err: float, state: HysteresisState) -> FluxCmd:
    return FluxCmd(flux_comparator(err, state.flux_band, int(state.last_flux)))


def torque_hysteresis_2level(err: float, state: HysteresisState) -> TorqueCmd:
    prev = int(state.last_torque) or 1
    return TorqueCmd(flux_comparator(err, state.torque_band, prev))


def torque_hysteresis_3level(err: float, state: HysteresisState) -> TorqueCmd:
    return TorqueCmd(torque_comparator3(err, state.torque_band, state.torque_inner,
                                        int(state.last_torque)))


def lookup_conventional(flux_cmd: FluxCmd, torque_cmd: TorqueCmd, sector: int,
                        patched: bool = False) -> int:
    if torque_cmd not in (TorqueCmd.TI, TorqueCmd.TD):
        raise ValueError("the conventional table has TI/TD rows only")
    _check_sector(sector)
    table = CONVENTIONAL_TABLE_PATCHED if patched else CONVENTIONAL_TABLE
    return int(table[_flux_index(flux_cmd), 0 if torque_cmd == TorqueCmd.TI else 1, sector - 1])


def lookup_modified(torque_cmd: TorqueCmd, flux_cmd: FluxCmd, sector: int,
                    patched: bool = False) -> int:
    _check_sector(sector)
    table = MODIFIED_TABLE_PATCHED if patched else MODIFIED_TABLE
    return int(table[_torque_index(torque_cmd), _flux_index(flux_cmd), sector - 1])


def _check_sector(sector: int):
    if not 1 <= int(sector) <= 6:
        raise ValueError(f"sector must be 1..6, got {sector}")


class References(NamedTuple):
    torque: float
    flux: float


class Measurements(NamedTuple):
    v_alphabeta: tuple[float, float]
    """mean line-neutral voltage over the last control period"""
    i_alphabeta: tuple[float, float]
    """mean current over the last control period"""
    currents: tuple[float, float, float]
    """sampled phase currents"""
    theta_elec: float


@dataclass(frozen=True)
class DtcConfig:
    mode: Mode = Mode.MODIFIED
    flux_ref: float = 0.058
    flux_band: float = 1e-3
    torque_band: float = 1.0
    torque_inner: float = 0.5
    table3_patched: bool = False
    table1_patched: bool = False
    leakage: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        HysteresisState(self.flux_band, self.torque_band, self.torque_inner)
        if self.flux_ref <= 0:
            raise ValueError("flux_ref must be positive")
        if self.leakage < 0:
            raise ValueError("leakage must be non-negative")


@dataclass(frozen=True)
class DtcState:
    flux: FluxEstimate
    hysteresis: HysteresisState
    torque_estimate: float = 0.0
    sector: int = 1

    @classmethod
    def initial(cls, motor: MotorParams, config: DtcConfig, theta_elec: float = 0.0,
                currents=(0.0, 0.0, 0.0)) -> "DtcState":
        """Estimator seeded with the magnet flux at a known rotor position."""
        ra, rb = rotor_flux_ab(motor.ke, motor.pole_pairs, theta_elec)
        ia, ib = clarke(*currents)
        flux = FluxEstimate(ra + motor.inductance * ia, rb + motor.inductance * ib)
        hyst = HysteresisState(config.flux_band, config.torque_band, config.torque_inner)
        return cls(flux, hyst, sector=flux_sector(flux, config.mode))


def control_step(refs: References, meas: Measurements, config: DtcConfig, state: DtcState,
                 motor: MotorParams, dt: float) -> tuple[SwitchState, DtcState]:
    """One DTC decision: estimate flux and torque, compare, pick and decode a vector."""
    flux = estimate_flux(state.flux, meas.v_alphabeta, meas.i_alphabeta,
                         motor.resistance, dt, config.leakage)
    t_est = torque_abc(motor.ke, meas.theta_elec, *meas.currents)
    mod = MODIFIED_TABLE_PATCHED if config.table3_patched else MODIFIED_TABLE
    h = state.hysteresis
    conv = CONVENTIONAL_TABLE_PATCHED if config.table1_patched else CONVENTIONAL_TABLE
    vec, f, t, k = decide(conv, mod, int(config.mode), flux.psi_alpha, flux.psi_beta,
                          refs.flux, t_est, refs.torque, h.flux_band, h.torque_band,
                          h.torque_inner, int(h.last_flux), int(h.last_torque))
    h = replace(h, last_flux=FluxCmd(f), last_torque=TorqueCmd(t))
    return decode_vector(int(vec)), DtcState(flux, h, t_est, int(k))


# ---------------------------------------------------------------------------
# audit export


class TableRow(NamedTuple):
    sector: int
    flux_cmd: str
    torque_cmd: str
    vector_id: int
    bits: str


CSV_HEADER = ("sector", "flux_cmd", "torque_cmd", "vector_id", "bits")


def table_rows(mode: Mode | str, patched: bool = False) -> list[TableRow]:
    """Every printed cell of a switching table, row by row, sectors 1..6."""
    mode = Mode.parse(mode)
    rows = []
    if mode == Mode.CONVENTIONAL:
        printed = list(conventional_rows(patched))
    else:
        printed = [(f, t, vs) for t, f, vs in MODIFIED_ROWS]
    for f, t, vs in printed:
        for k, v in enumerate(vs, start=1):
            if patched and mode == Mode.MODIFIED and (t, f, k) == PATCHED_CELL[:3]:
                v = PATCHED_CELL[3]
            rows.append(TableRow(k, f.name, t.name, v, VECTOR_CODES[v]))
    return rows


def write_table_csv(rows: Iterable[TableRow], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r)


def read_table_csv(source: str | TextIO) -> list[TableRow]:
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source)
    header = next(reader)
    if tuple(header) != CSV_HEADER:
        raise ValueError(f"unexpected table header {header}")
    rows = []
    for line in reader:
        k, f, t, v, bits = line
        rows.append(TableRow(int(k), f, t, int(v), bits))
    return rows
