import sys

import numpy as np
import pytest

from kcbo import KineticParams, make_objective
from kcbo.experiments import ExperimentConfig


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def cosine2():
    return make_objective("cosine_well", 2)


@pytest.fixture(scope="session")
def admissible(cosine2):
    """The parameter set every experiment uses by default."""
    return ExperimentConfig().resolve_params(cosine2)


@pytest.fixture
def basic_params():
    return KineticParams(m=0.1, gamma=2.0, sigma=0.0, alpha=0.0, dt=1e-3)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(module, "ACCEPTANCE_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
