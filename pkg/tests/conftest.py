import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qzk import qsat

settings.register_profile("qzk", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("qzk")

ONE = [("CNOT", (0, 1))]  # accepts iff the data qubit is 1
ZERO = [("X", (1,)), ("CNOT", (0, 1))]  # accepts iff the data qubit is 0


def instance(n, subsets, circuits, k=1, gamma=1):
    return qsat.QsatInstance(n, k, gamma, subsets, circuits)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def all_accept():
    return instance(1, [(0,), (0,)], [qsat.always_accept_circuit(1)] * 2)


@pytest.fixture(scope="session")
def one_check():
    return instance(1, [(0,), (0,)], [ONE, qsat.always_accept_circuit(1)])


@pytest.fixture(scope="session")
def contradiction():
    return instance(1, [(0,), (0,)], [ONE, ZERO])


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
