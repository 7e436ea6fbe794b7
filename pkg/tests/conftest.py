"""Shared fixtures; the acceptance suite reports one line per criterion at the end of the run."""

from __future__ import annotations

import numpy as np
import pytest

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def acceptance_report():
    def record(number: int, passed: bool, detail: str) -> None:
        ACCEPTANCE_LINES[number] = f"CRITERION {number}: {'PASS' if passed else 'FAIL'}  {detail}"

    return record


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
