import numpy as np
import pytest

from mmrelay.model import LargeScaleFading, SystemConfig, validate_config

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def unit_fading():
    return LargeScaleFading.symmetric(10)


@pytest.fixture
def reference_config():
    """Reference setup: P_U=10, P_R=40, K=10, unit noise."""
    return validate_config(SystemConfig(n_antennas=128, n_pairs=10))


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
