from __future__ import annotations

from datetime import date

import numpy as np
import pytest

from fixedloss.data import DailyProfile, Direction

DAY = date(2021, 3, 1)


def make_profile(energies, direction="up", start=100, escalator_id="E1", day=DAY, pad=True):
    """Operating readings from ``start`` onward, zero-padded before and after."""
    energies = np.asarray(energies, dtype=float)
    minutes = start + np.arange(energies.size)
    if pad:
        before = np.arange(0, start)
        after = np.arange(start + energies.size, min(1440, start + energies.size + 10))
        minutes = np.concatenate([before, minutes, after])
        energies = np.concatenate([np.zeros(before.size), energies, np.zeros(after.size)])
    return DailyProfile.from_readings(escalator_id, day, Direction(direction), minutes, energies)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# one line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE_RESULTS: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[n])
