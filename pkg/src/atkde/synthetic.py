"""Synthetic arrival logs with controllable global, weekday and intraday structure."""

from __future__ import annotations

import csv
import datetime as dt
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .eventlog import US_PER_DAY, US_PER_SECOND, ArrivalDataset, day_number_of_date, format_instant

HOUR = 3600.0

# (rng, n) -> n clock times in seconds after midnight
IntradayProfile = Callable[[np.random.Generator, int], np.ndarray]

DEFAULT_START = dt.date(2023, 1, 2)  # a Monday


def uniform_hours(lo: float = 8.0, hi: float = 18.0) -> IntradayProfile:
    def draw(rng, n):
        return rng.uniform(lo * HOUR, hi * HOUR, n)
    return draw


def business_profile(morning_share: float = 0.65) -> IntradayProfile:
    """Morning peak around 10:00, flatter afternoon, nothing outside 07:00-20:00."""
    def draw(rng, n):
        morning = rng.random(n) < morning_share
        out = np.where(morning, rng.normal(10.0 * HOUR, 1.0 * HOUR, n), rng.normal(15.0 * HOUR, 1.6 * HOUR, n))
        return np.clip(out, 7.0 * HOUR, 20.0 * HOUR)
    return draw


def simulate(
    daily_rates: Sequence[float],
    seed: int = 0,
    start: dt.date = DEFAULT_START,
    weekday_factors: Sequence[float] | None = None,
    intraday: IntradayProfile | None = None,
    poisson: bool = True,
) -> ArrivalDataset:
    """Draw one arrival dataset, day by day.

    ``daily_rates[i]`` is the expected count on day ``i``, multiplied by
    ``weekday_factors[weekday - 1]`` when given. With ``poisson=False`` the
    count is the rounded expectation, so only clock times are random.
    """
    rng = np.random.default_rng(seed)
    intraday = intraday or uniform_hours()
    factors = np.ones(7) if weekday_factors is None else np.asarray(weekday_factors, dtype=float)
    first = day_number_of_date(start)
    stamps = []
    for i, rate in enumerate(daily_rates):
        date = start + dt.timedelta(days=i)
        lam = rate * factors[date.isoweekday() - 1]
        n = rng.poisson(lam) if poisson else int(round(lam))
        if n == 0:
            continue
        secs = np.asarray(intraday(rng, n))
        us = np.clip(np.round(secs * US_PER_SECOND).astype(np.int64), 0, US_PER_DAY - 1)
        stamps.append((first + i) * US_PER_DAY + us)
    if not stamps:
        return ArrivalDataset(days=())
    return ArrivalDataset.from_timestamps(np.concatenate(stamps))


def step_rates(levels: Sequence[float], lengths: Sequence[int]) -> np.ndarray:
    return np.concatenate([np.full(n, float(v)) for v, n in zip(levels, lengths)])


def step_log(seed: int = 0) -> ArrivalDataset:
    """60 days at 50/day followed by 60 days at 10/day (Poisson counts)."""
    return simulate(step_rates([50, 10], [60, 60]), seed=seed)


def constant_log(seed: int = 0, rate: int = 50, days: int = 120) -> ArrivalDataset:
    """Exactly ``rate`` arrivals every day; only clock times vary."""
    return simulate(np.full(days, rate), seed=seed, poisson=False)


def alternating_log(seed: int = 0, block: int = 30) -> ArrivalDataset:
    """Four blocks alternating 50/10/50/10 arrivals per day."""
    return simulate(step_rates([50, 10, 50, 10], [block] * 4), seed=seed)


STABLE_WEEKDAYS = (1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0)
SHIFTED_WEEKDAYS = (1.6, 1.3, 1.0, 0.7, 0.4, 0.0, 0.0)


def loan_drift_log(seed: int = 0) -> ArrivalDataset:
    """Loan-application style drift: stable, then a drop, then a recovery that persists.

    The stable phase has flat weekdays and a balanced day; after the drop the
    weekday load leans on Monday and arrivals crowd into the morning.
    """
    s1, s2, s3 = np.random.SeedSequence(seed).spawn(3)
    stable = simulate(np.full(100, 60.0), s1, weekday_factors=STABLE_WEEKDAYS, intraday=business_profile(0.5))
    drop = simulate(np.full(30, 12.0), s2, start=DEFAULT_START + dt.timedelta(days=100),
                    weekday_factors=SHIFTED_WEEKDAYS, intraday=business_profile(0.8))
    recovery = simulate(np.full(200, 30.0), s3, start=DEFAULT_START + dt.timedelta(days=130),
                        weekday_factors=SHIFTED_WEEKDAYS, intraday=business_profile(0.8))
    return ArrivalDataset.from_timestamps(np.concatenate([stable.timestamps(), drop.timestamps(),
                                                          recovery.timestamps()]))


def stationary_log(seed: int = 0, days: int = 200, rate: float = 40.0) -> ArrivalDataset:
    """Drift-free working-week process with uniform arrivals over 08:00-17:00."""
    return simulate(np.full(days, rate), seed=seed, weekday_factors=(1, 1, 1, 1, 1, 0, 0),
                    intraday=uniform_hours(8.0, 17.0))


def write_event_log(dataset: ArrivalDataset, path: str | Path, events_per_case: int = 1) -> None:
    """Write a ``case_id,activity,timestamp`` CSV; extra events follow each arrival by minutes."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["case_id", "activity", "timestamp"])
        for n, t in enumerate(dataset.timestamps()):
            for k in range(events_per_case):
                writer.writerow([f"case_{n}", f"act_{k}", format_instant(int(t) + k * 60 * US_PER_SECOND)])
