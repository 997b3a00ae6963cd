import warnings

import numpy as np
import pytest

from fluorospec import config
from fluorospec.model import random_params

CRITERIA = {}


def record(number, passed, detail):
    CRITERIA[number] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        passed, detail = CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture
def check():
    return record


@pytest.fixture(scope="session")
def draws():
    """100 seeded random parameter sets from the documented box."""
    rng = np.random.default_rng(20240601)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return [random_params(rng) for _ in range(100)]


@pytest.fixture
def fig3():
    return config.preset("fig3_nofeedback").params
