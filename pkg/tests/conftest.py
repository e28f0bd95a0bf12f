import numpy as np
import pytest

from dfrc_aging.config import ScenarioParams, SystemConfig
from dfrc_aging.model import TargetState, sample_scenario


@pytest.fixture
def cfg():
    return SystemConfig()


@pytest.fixture
def small_cfg():
    # small arrays keep the joint Fisher matrix and measurement grids cheap
    return SystemConfig(num_tx_antennas=8, num_rx_antennas=8, num_users=3,
                        symbols_per_block=100, training_symbols=24, total_subcarriers=32)


@pytest.fixture
def target():
    return TargetState(angle=0.3, distance=150.0, velocity=30.0, heading=0.2 + np.pi)


@pytest.fixture
def scenario(cfg):
    return sample_scenario(cfg, seed=7, trial=0, params=ScenarioParams())


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
