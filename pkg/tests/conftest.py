import numpy as np
import pytest

from critical_hawkes.params import ModelConfig


@pytest.fixture
def desk():
    return ModelConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for res in RESULTS:
        terminalreporter.write_line(res.line())
        for d in res.details:
            terminalreporter.write_line(f"    {d}")
