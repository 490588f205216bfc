import datetime as dt

import numpy as np
import pytest

from lagtrend.features import GradientMatrix, build_gradient_matrix
from lagtrend.panel import TickRecord
from lagtrend.sessions import SessionCalendar
from lagtrend.synth import Dependency, LagStructure, generate_panel


def weekday_calendar(**kwargs) -> SessionCalendar:
    return SessionCalendar(**kwargs)


def grid_records(calendar, days, prices_by_id, skip=()):
    """Records for every (instrument, grid stamp) except those in ``skip``.

    ``prices_by_id`` maps id -> callable(position) -> price.
    """
    grid = SessionCalendar.build_grid(calendar, days[0], days[-1])
    records = []
    for ric, price in prices_by_id.items():
        for i, stamp in enumerate(grid.timestamps):
            if (ric, i) in skip:
                continue
            ts = stamp.astype("datetime64[m]").astype(dt.datetime)
            records.append(TickRecord(ric, ts, float(price(i))))
    return grid, records


@pytest.fixture
def calendar():
    return weekday_calendar()


@pytest.fixture(scope="session")
def small_structure() -> LagStructure:
    return LagStructure(
        (Dependency("SYN005", ("SYN000", "SYN001"), (1.0, -1.0)), Dependency("SYN004", ("SYN002",), (1.0,))),
        noise_level=0.5,
        seed=11,
    )


@pytest.fixture(scope="session")
def small_synthetic(small_structure):
    return generate_panel(6, 120, 7, small_structure)


@pytest.fixture(scope="session")
def small_gradients(small_synthetic) -> GradientMatrix:
    return build_gradient_matrix(small_synthetic.panel)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# PASS/FAIL lines from the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
