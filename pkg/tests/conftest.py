import numpy as np
import pytest

from sramage import sram_model

ACCEPTANCE_RESULTS: list = []


@pytest.fixture(scope="session")
def msp430():
    return sram_model.msp430_params()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def record():
    """Log one acceptance line: record(name, passed, detail)."""
    def _record(name, passed, detail=""):
        line = f"{'PASS' if passed else 'FAIL'}  {name}: {detail}"
        ACCEPTANCE_RESULTS.append(line)
        print(line)
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
