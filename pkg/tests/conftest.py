from __future__ import annotations

import pytest

from cristal import ItemStore, StepClock, sequential_uuids
from cristal import fixtures


@pytest.fixture
def store() -> ItemStore:
    return ItemStore(clock=StepClock(), id_factory=sequential_uuids("test"))


@pytest.fixture
def ecal() -> tuple[ItemStore, dict[str, str]]:
    """The bundled ECAL model, before any items are instantiated."""
    s = fixtures.load()
    return s, fixtures.model_ids(s)


@pytest.fixture
def ecal_run(ecal):
    """The ECAL model after the full scenario: 3 Products, 1 Order, 1 Shipment."""
    s, ids = ecal
    return s, ids, fixtures.run_scenario(s, ids)


# criterion number -> (title, passed), filled in by test_acceptance.py
VERDICTS: dict[int, tuple[str, bool]] = {}


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(VERDICTS):
        title, ok = VERDICTS[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {title}")
