import numpy as np
import pytest

from sigmadamp.spectral import GridSpec, RealField

# Acceptance lines collected by test_acceptance.py and echoed at the end of
# the run, one per criterion.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_criterion():
    def record(number: int, title: str, passed: bool, detail: str = ""):
        line = f"[criterion {number:2d}] {'PASS' if passed else 'FAIL'}  {title}"
        if detail:
            line += f"  ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def gaussian(grid: GridSpec, amp=1.0, width=1.0) -> RealField:
    r2 = sum(x * x for x in grid.coordinates())
    return RealField(grid, amp * np.exp(-r2 / (2 * width * width)))


@pytest.fixture
def grid1d():
    return GridSpec(1, 256, 20.0, 1.0)
