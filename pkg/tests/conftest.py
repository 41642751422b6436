from __future__ import annotations

from importlib import resources

import pytest

from bldc_regen.config import Scenario, apply_overrides

ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}


def scenario_path(name: str) -> str:
    return str(resources.files("bldc_regen") / "scenarios" / name)


def make_scenario(**overrides) -> Scenario:
    """Default scenario with dotted overrides given as keyword pairs ``dtc__mode="..."``."""
    return apply_overrides(Scenario(), {k.replace("__", "."): v for k, v in overrides.items()})


@pytest.fixture
def record_criterion():
    """Record one acceptance outcome; all of them are listed at the end of the run."""
    def record(number: int, ok: bool, detail: str):
        ACCEPTANCE.setdefault(number, []).append((bool(ok), detail))
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[number]
        ok = all(p[0] for p in parts)
        detail = "; ".join(p[1] for p in parts)
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
