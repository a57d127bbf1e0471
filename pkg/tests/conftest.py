import functools
import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from helpers import make_field
from pbeid.solver import generate_case

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large]
)
settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def cached_case(case_id):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return generate_case(case_id)


@pytest.fixture
def case_field():
    return cached_case


@pytest.fixture
def exp_field():
    """n = exp(-x) on [0.01, 10.01] with spacing 0.01, constant in time."""
    x = 0.01 + 0.01 * np.arange(1001)
    return make_field(x, [0.0, 0.1, 0.2], lambda X, T: np.exp(-X))


# one line per acceptance criterion, printed after the run
ACCEPTANCE: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
