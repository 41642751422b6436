"""Ideal two-level three-phase inverter with freewheeling diodes.

Switch bits are ordered ``(A_high, A_low, B_high, B_low, C_high, C_low)``.
Terminal voltages are referred to the DC-bus midpoint, so a closed high
switch puts its phase at ``+Vdc/2`` and a closed low switch at ``-Vdc/2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

from .motor import PhaseQuantities

VECTOR_CODES = (
    "010101",  # V0, all low
    "100001",  # V1, A+ C-
    "001001",  # V2, B+ C-
    "011000",  # V3, B+ A-
    "010010",  # V4, C+ A-
    "000110",  # V5, C+ B-
    "100100",  # V6, A+ B-
    "101010",  # V7, all high
)


class InvalidVector(ValueError):
    pass


def _legs_of(code: str) -> tuple[int, int, int]:
    legs = []
    for k in range(3):
        hi, lo = code[2 * k] == "1", code[2 * k + 1] == "1"
        legs.append(1 if hi else (-1 if lo else 0))
    return tuple(legs)


#: leg state per vector: +1 high switch closed, -1 low switch closed, 0 both open
LEG_TABLE = np.array([_legs_of(c) for c in VECTOR_CODES], dtype=np.int64)


@dataclass(frozen=True)
class SwitchState:
    bits: tuple[bool, bool, bool, bool, bool, bool]
    vector_id: int

    def __post_init__(self):
        if len(self.bits) != 6:
            raise ValueError("a switch state has six bits")
        for k in range(3):
            if self.bits[2 * k] and self.bits[2 * k + 1]:
                raise ValueError(f"shoot-through on leg {'ABC'[k]}")
        if VECTOR_CODES[self.vector_id] != self.code:
            raise ValueError(f"bits {self.code} do not encode V{self.vector_id}")

    @property
    def code(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)

    @property
    def legs(self) -> tuple[int, int, int]:
        return tuple(int(x) for x in LEG_TABLE[self.vector_id])

    def __str__(self):
        return f"V{self.vector_id}({self.code})"


def decode_vector(vector_id: int) -> SwitchState:
    if not isinstance(vector_id, (int, np.integer)) or not 0 <= vector_id <= 7:
        raise InvalidVector(f"voltage vector id must be 0..7, got {vector_id!r}")
    code = VECTOR_CODES[vector_id]
    return SwitchState(tuple(ch == "1" for ch in code), int(vector_id))


def encode_bits(code: str) -> SwitchState:
    """Inverse of :func:`decode_vector` for a six-character bit string."""
    try:
        return decode_vector(VECTOR_CODES.index(code))
    except ValueError:
        raise InvalidVector(f"{code!r} is not one of the eight inverter vectors") from None


@njit(cache=True)
def solve_terminals(la, lb, lc, ia, ib, ic, ea, eb, ec, res, vdc):
    """Resolve terminal, star-point and phase voltages for one switch state.

    Returns ``(vta, vtb, vtc, vn, ca, cb, cc, da, db, dc)`` where ``c*`` marks
    phases tied to a rail (by switch or diode) and ``d*`` is the diode rail
    in use (+1 upper, -1 lower, 0 none).  An open phase with zero current is
    first left floating; if its terminal would leave the bus it is clamped to
    the violated rail and the star point re-solved once.
    """
    h = 0.5 * vdc
    legs = (la, lb, lc)
    cur = (ia, ib, ic)
    emf = (ea, eb, ec)
    vt = [0.0, 0.0, 0.0]
    con = [0, 0, 0]
    dio = [0, 0, 0]
    for x in range(3):
        if legs[x] == 1:
            vt[x] = h
            con[x] = 1
        elif legs[x] == -1:
            vt[x] = -h
            con[x] = 1
        elif cur[x] > 0.0:
            vt[x] = -h
            con[x] = 1
            dio[x] = -1
        elif cur[x] < 0.0:
            vt[x] = h
            con[x] = 1
            dio[x] = 1

    for _pass in range(2):
        n = con[0] + con[1] + con[2]
        if n >= 1:
            acc = 0.0
            for x in range(3):
                if con[x] == 1:
                    acc += vt[x] - res * cur[x] - emf[x]
            vn = acc / n
        else:
            emax = max(ea, max(eb, ec))
            emin = min(ea, min(eb, ec))
            vn = -0.5 * (emax + emin)
        changed = False
        for x in range(3):
            if con[x] == 0:
                v = vn + emf[x]
                if v > h:
                    vt[x] = h
                    con[x] = 1
                    dio[x] = 1
                    changed = True
                elif v < -h:
                    vt[x] = -h
                    con[x] = 1
                    dio[x] = -1
                    changed = True
                else:
                    vt[x] = v
        if not changed:
            break
    n = con[0] + con[1] + con[2]
    if n == 1:
        # a single rail connection cannot carry current
        for x in range(3):
            if con[x] == 1 and dio[x] != 0:
                con[x] = 0
                dio[x] = 0
                vt[x] = vn + emf[x]
    return vt[0], vt[1], vt[2], vn, con[0], con[1], con[2], dio[0], dio[1], dio[2]


@dataclass(frozen=True)
class TerminalSolution:
    terminal: PhaseQuantities
    neutral: float
    phase: PhaseQuantities
    """line-neutral voltages"""
    conducting: tuple[bool, bool, bool]
    diode: tuple[int, int, int]


def solve(sw: SwitchState, currents: Sequence[float], emfs: Sequence[float], vdc: float,
          resistance: float = 0.0) -> TerminalSolution:
    la, lb, lc = sw.legs
    vta, vtb, vtc, vn, ca, cb, cc, da, db, dc = solve_terminals(
        la, lb, lc, float(currents[0]), float(currents[1]), float(currents[2]),
        float(emfs[0]), float(emfs[1]), float(emfs[2]), resistance, vdc)
    terminal = PhaseQuantities(vta, vtb, vtc)
    con = (bool(ca), bool(cb), bool(cc))
    phase = PhaseQuantities(*(vt - vn if c else e for vt, c, e in zip(terminal, con, emfs)))
    return TerminalSolution(terminal, vn, phase, con, (da, db, dc))


def terminal_voltages(sw: SwitchState, currents: Sequence[float], emfs: Sequence[float],
                      vdc: float) -> PhaseQuantities:
    """Line-neutral phase voltages the inverter imposes on the machine.

    A floating phase (open leg, zero current, terminal inside the bus) shows
    its own back-EMF, so its current stays at zero.
    """
    if vdc <= 0:
        raise ValueError("DC-link voltage must be positive")
    return solve(sw, currents, emfs, vdc).phase


@njit(cache=True)
def dc_current(la, lb, lc, da, db, dc, ia, ib, ic):
    i = 0.0
    if la == 1 or da == 1:
        i += ia
    if lb == 1 or db == 1:
        i += ib
    if lc == 1 or dc == 1:
        i += ic
    return i


def dc_link_current(sw: SwitchState, currents: Sequence[float],
                    diode_conduction: Sequence[int] = (0, 0, 0)) -> float:
    """Battery-side current, positive when the battery discharges.

    ``diode_conduction`` gives the rail each phase diode conducts to
    (+1 upper, -1 lower, 0 none), as reported by :func:`solve`.
    """
    la, lb, lc = sw.legs
    da, db, dc = (int(d) for d in diode_conduction)
    return dc_current(la, lb, lc, da, db, dc, float(currents[0]), float(currents[1]), float(currents[2]))


@njit(cache=True)
def block_diodes(da, db, dc, ia0, ib0, ic0, ia, ib, ic):
    """Zero any diode current that changed sign during a step, then restore sum(i) = 0."""
    cur0 = (ia0, ib0, ic0)
    cur = [ia, ib, ic]
    dio = (da, db, dc)
    blocked = [False, False, False]
    for x in range(3):
        d = dio[x]
        # lower diode carries positive phase current, upper diode negative
        if (d == -1 and cur0[x] > 0.0 and cur[x] <= 0.0) or (d == 1 and cur0[x] < 0.0 and cur[x] >= 0.0):
            cur[x] = 0.0
            blocked[x] = True
    if blocked[0] or blocked[1] or blocked[2]:
        free = 0
        for x in range(3):
            if not blocked[x] and cur[x] != 0.0:
                free += 1
        s = cur[0] + cur[1] + cur[2]
        if free > 0:
            for x in range(3):
                if not blocked[x] and cur[x] != 0.0:
                    cur[x] -= s / free
    return cur[0], cur[1], cur[2]
