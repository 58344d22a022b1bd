import numpy as np
import pytest

from bindy.cases import LorenzSetup, lorenz_data


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def lorenz_small():
    """Short noisy Lorenz run, cheap enough for unit tests."""
    return lorenz_data(LorenzSetup(duration=3.0, extrapolation=1.0), np.random.default_rng(7))


ACCEPTANCE_LINES: dict = {}


def record_acceptance(key, passed: bool, detail: str):
    line = f"{'PASS' if passed else 'FAIL'}  {key}: {detail}"
    ACCEPTANCE_LINES[key] = line
    print(line)
    return passed


def record_info(key, detail: str):
    line = f"INFO  {key}: {detail}"
    ACCEPTANCE_LINES[key] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES, key=lambda k: (not k[0].isdigit(), k)):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
