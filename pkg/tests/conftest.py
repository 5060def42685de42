import numpy as np
import pytest

from kinlab.spectral_core import FrequencyGrid, SobolevOrder

ACCEPTANCE_LINES: dict = {}


def record_acceptance(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def fgrid():
    return FrequencyGrid.uniform()


@pytest.fixture(scope="session")
def order6():
    return SobolevOrder(6, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
