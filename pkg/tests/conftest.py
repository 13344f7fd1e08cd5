import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from fnn_forge.datasets import simulate_partition  # noqa: E402
from fnn_forge.timeseries import TimeSeries, standardize  # noqa: E402


@pytest.fixture(scope="session")
def lorenz_cloud():
    cloud, _ = simulate_partition("lorenz", seed=0)
    return cloud


@pytest.fixture(scope="session")
def lorenz_x(lorenz_cloud):
    return standardize(TimeSeries(lorenz_cloud.points[:, 0], lorenz_cloud.dt, "lorenz-x"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Record the outcome of one acceptance criterion; returns the verdict."""

    def record(number, ok, detail):
        _ACCEPTANCE[number] = (bool(ok), detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}")
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'} | {detail}")
