import datetime as dt

import numpy as np
import pytest

from atkde.eventlog import US_PER_DAY, US_PER_SECOND, ArrivalDataset, DayArrivals, day_number_of_date

HOUR_US = 3600 * US_PER_SECOND
MONDAY = dt.date(2024, 1, 1)


def at(date: dt.date, hours: float) -> int:
    """Instant in microseconds for a clock time given in (fractional) hours."""
    return day_number_of_date(date) * US_PER_DAY + int(round(hours * HOUR_US))


def dataset_from_counts(counts, start=MONDAY, first_hour=9.0, spacing_minutes=5.0) -> ArrivalDataset:
    """Days with the given arrival counts, evenly spaced from ``first_hour``."""
    stamps = []
    for i, n in enumerate(counts):
        date = start + dt.timedelta(days=i)
        stamps.extend(at(date, first_hour + k * spacing_minutes / 60) for k in range(int(n)))
    days = ArrivalDataset.from_timestamps(np.array(stamps, dtype=np.int64)).days
    # keep leading/trailing empty days so the day count matches len(counts)
    by_date = {d.date: d for d in days}
    full = [by_date.get(start + dt.timedelta(days=i),
                        DayArrivals(start + dt.timedelta(days=i), np.empty(0, dtype=np.int64)))
            for i in range(len(counts))]
    return ArrivalDataset.from_days(full)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
