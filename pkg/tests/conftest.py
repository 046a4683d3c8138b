from __future__ import annotations

import math

import pytest

from giantatom.core_model import SystemConfig

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def quarter_turn_config():
    """Two legs two sites apart, chirality-maximizing phase, default chain."""
    return SystemConfig.giant_atom(d=2, phi_c=math.pi / 2)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
