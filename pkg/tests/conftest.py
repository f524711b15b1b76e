from datetime import datetime, timedelta

import numpy as np
import pytest

from iot_energy.ingest import UnivariateSeries, fill_missing, resample
from iot_energy.synthetic import household_records

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def synthetic_records():
    return household_records(days=14, seed=3)


@pytest.fixture(scope="session")
def hourly_series(synthetic_records):
    return resample(fill_missing(synthetic_records), interval=timedelta(hours=1))


@pytest.fixture
def make_series():
    def _make(values, step=60.0, start=datetime(2007, 1, 1)):
        return UnivariateSeries(start, step, np.asarray(values, dtype=float))
    return _make


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
