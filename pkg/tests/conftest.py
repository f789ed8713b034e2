from __future__ import annotations

import pytest

ACCEPTANCE_LINES: list[tuple[int, str]] = []


@pytest.fixture
def record_acceptance():
    """Record one acceptance line; printed in the terminal summary."""

    def record(number: int, name: str, passed: bool, detail: str) -> None:
        status = "PASS" if passed else "FAIL"
        ACCEPTANCE_LINES.append((number, f"[{status}] criterion {number:>2}: {name} -- {detail}"))

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
