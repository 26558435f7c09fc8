import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qcport.scenarios import ScenarioSet, generate_synthetic

settings.register_profile("qcport", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("qcport")


@pytest.fixture(scope="session")
def syn20():
    return generate_synthetic(20, 3, seed=1)


@pytest.fixture
def two_state():
    return ScenarioSet([0.5, 0.5], [[1.2, 0.9], [0.8, 1.1]])


@pytest.fixture
def deterministic():
    return ScenarioSet([1.0], [[1.1, 1.05]])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[key])
