from datetime import datetime, timedelta
from pathlib import Path

import numpy as np
import pytest

from sdebreaks import PriceSeries

DATA = Path(__file__).parent / "data"


def session_stamps(first_day: datetime, n_days: int, bars_per_day: int = 78):
    """5-minute bar timestamps 09:30..15:55 over consecutive weekdays."""
    stamps = []
    day = first_day
    while len(stamps) < n_days * bars_per_day:
        if day.weekday() < 5:
            open_ = day.replace(hour=9, minute=30, second=0, microsecond=0)
            stamps += [open_ + timedelta(minutes=5 * i) for i in range(bars_per_day)]
        day += timedelta(days=1)
    return stamps


def write_bars_csv(path, stamps, prices):
    with open(path, "w") as fh:
        fh.write("timestamp,price\n")
        for t, p in zip(stamps, prices):
            fh.write(f"{t.isoformat()},{float(p)!r}\n")


@pytest.fixture
def rng():
    return np.random.default_rng(20240417)


@pytest.fixture
def ten_bars():
    start = datetime(2021, 4, 6, 10, 0)
    return PriceSeries(
        tuple(start + timedelta(minutes=m) for m in range(1, 11)),
        np.arange(1.0, 11.0),
    )


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
