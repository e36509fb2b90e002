import numpy as np
import pytest

from wificontract.market import Contract, Population


@pytest.fixture
def e1():
    """Two-type toy market: theta=(1,2), N=(2,2), eta=0.5, N_A=2, T=1, p_max=2."""
    return Population(np.array([1.0, 2.0]), np.array([2.0, 2.0]), 0.5, 2.0, 1.0, 2.0)


@pytest.fixture
def e1_contract():
    """All-Bill contract at prices (1, 2) with the closed-form optimal fees."""
    return Contract.from_arrays([1.0, 2.0], [0.125, 5.0 / 12.0], 2.0)


ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
