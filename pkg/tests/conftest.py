import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mapgate.model import default_device


@pytest.fixture
def device():
    return default_device()


@pytest.fixture
def noisy_device():
    return default_device(with_noise=True)


@pytest.fixture
def rng():
    return np.random.default_rng(20260814)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    # acceptance tests record one PASS/FAIL line each; surface them even
    # though pytest captures stdout for passing tests
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None) if mod else None
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
