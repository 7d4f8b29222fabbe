import math

import numpy as np
import pytest

from irsgame.dynamics import ReplicatorField
from irsgame.scenario import builtin_scenario_path, load_scenario, read_config
from irsgame.utility import evaluate_strategies, net_values

MU = math.exp(-2)
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def table2_path():
    return builtin_scenario_path("table2")


@pytest.fixture(scope="session")
def two_sp_path():
    return builtin_scenario_path("two_sp")


@pytest.fixture(scope="session")
def table2(table2_path):
    return load_scenario(table2_path)


@pytest.fixture(scope="session")
def table2_raw(table2_path):
    return read_config(table2_path)


@pytest.fixture(scope="session")
def table2_econ(table2):
    return evaluate_strategies(table2)


@pytest.fixture(scope="session")
def table2_field(table2, table2_econ):
    return ReplicatorField(net_values(table2_econ), table2.population, MU)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
