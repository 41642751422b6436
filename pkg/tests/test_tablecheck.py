import math

import pytest

from bldc_regen import _loop
from bldc_regen.config import Scenario
from bldc_regen.dtc import FluxCmd, Mode, TorqueCmd, sector_offset
from bldc_regen.motor import clarke, rotor_flux_ab
from bldc_regen.tablecheck import LOAD_ANGLE, check_table, failures, operating_point


@pytest.mark.parametrize("mode", [Mode.CONVENTIONAL, Mode.MODIFIED])
@pytest.mark.parametrize("sector", range(1, 7))
def test_operating_point_geometry(mode, sector):
    sc = Scenario()
    y, (sa, sb) = operating_point(sc, sector, mode)
    centre = math.radians(60 * (sector - 1)) + sector_offset(int(mode))
    assert math.atan2(sb, sa) == pytest.approx(math.remainder(centre, 2 * math.pi), abs=1e-9)
    assert math.hypot(sa, sb) == pytest.approx(sc.dtc.flux_ref)
    ra, rb = rotor_flux_ab(sc.motor.ke, sc.motor.pole_pairs, y[_loop.TH])
    lag = math.remainder(math.atan2(sb, sa) - math.atan2(rb, ra), 2 * math.pi)
    assert lag == pytest.approx(LOAD_ANGLE, abs=1e-9)
    # stator flux is consistent with the currents
    ia, ib = clarke(y[_loop.IA], y[_loop.IB], y[_loop.IC])
    assert sa == pytest.approx(ra + sc.motor.inductance * ia)
    assert sb == pytest.approx(rb + sc.motor.inductance * ib)


def test_patched_tables_are_fully_consistent():
    assert failures(check_table("modified", patched=True)) == []
    assert failures(check_table("conventional", patched=True)) == []


def test_verbatim_modified_table_fails_only_the_known_cell():
    bad = failures(check_table("modified"))
    assert [(r.sector, r.torque_cmd, r.flux_cmd, r.vector_id) for r in bad] == \
        [(5, TorqueCmd.TD, FluxCmd.FD, 6)]


def test_cell_report_text():
    r = check_table("modified")[0]
    assert r.describe().startswith("sector 1 FI TI -> V2")
    assert "ok" in r.describe()
