"""Arrival generation from a fitted KDE ensemble."""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, GenerationError
from .eventlog import US_PER_DAY, US_PER_SECOND, DayArrivals, date_of_day_number, day_number, day_number_of_date
from .kde import ModelEnsemble
from .partition import NODATA, BinGrid, WeekdayClusterMap

REPLICATED = "replicated-pattern"
MOST_RECENT = "most-recent"
MAX_ARRIVALS_PER_BIN = 1_000_000


@dataclass(frozen=True)
class SegmentSchedule:
    """Global-cluster label for every simulated day.

    Simulated day ``i`` sits ``offset + i`` days after the last training day
    (``offset = 1`` means the simulation starts the day after training ends).
    Days up to and including the last training day keep ``final_label``; after
    that, ``lead`` more days of ``final_label`` are followed by ``cycle``
    repeated indefinitely.
    """

    provenance: str
    final_label: int
    cycle: tuple[tuple[int, int], ...] = ()
    lead: int = 0
    offset: int = 1

    def label(self, i: int) -> int:
        d = self.offset + i - 1  # days elapsed after the last training day, minus one
        if d < self.lead or not self.cycle:
            return self.final_label
        d -= self.lead
        period = sum(n for _, n in self.cycle)
        d %= period
        for lab, n in self.cycle:
            if d < n:
                return lab
            d -= n
        raise AssertionError("unreachable")

    def labels(self, n_days: int) -> np.ndarray:
        return np.array([self.label(i) for i in range(n_days)], dtype=np.int64)


def find_period(labels: Sequence[int], lengths: Sequence[int], window: int) -> int | None:
    """Smallest period at which the labelled blocks repeat with lengths agreeing within ``window``.

    The final block may be cut short by the end of the data, so its length only
    has to stay below the matching earlier block plus ``window``.
    """
    m = len(labels)
    last = m - 1
    for p in range(1, m // 2 + 1):
        if any(labels[i] != labels[i + p] for i in range(m - p)):
            continue
        ok = True
        for i in range(m - p):
            diff = lengths[i + p] - lengths[i]
            if i + p == last:
                ok = diff <= window
            else:
                ok = abs(diff) <= window
            if not ok:
                break
        if ok:
            return p
    return None


def estimate_segment_schedule(
    labels: Sequence[int],
    lengths: Sequence[int],
    window: int = 7,
    offset: int = 1,
) -> SegmentSchedule:
    """Continue a recurring label pattern, or repeat the most recent cluster."""
    if not labels:
        raise ConfigurationError("need at least one segment label")
    labels, lengths = list(labels), list(lengths)
    p = find_period(labels, lengths, window)
    if p is None:
        return SegmentSchedule(MOST_RECENT, labels[-1], offset=offset)
    last = len(labels) - 1
    typical = []
    for r in range(p):
        members = [lengths[i] for i in range(r, last, p)]
        typical.append(max(1, int(round(float(np.mean(members))))))
    phase = last % p
    lead = max(0, typical[phase] - lengths[last])
    cycle = tuple((labels[(phase + 1 + s) % p], typical[(phase + 1 + s) % p]) for s in range(p))
    return SegmentSchedule(REPLICATED, labels[last], cycle, lead, offset)


def _bin_arrivals(model, rng, begin: int, end: int) -> np.ndarray:
    """Cumulative sampled inter-arrivals from ``begin`` while strictly before ``end``."""
    mean_step = max(float(model.samples.mean()) * US_PER_SECOND, 1.0)
    batch = int(min(max(16, 1.25 * (end - begin) / mean_step + 8), 65_536))
    out = []
    cursor = begin
    total = 0
    while True:
        steps = np.maximum(np.rint(model.sample(rng, batch) * US_PER_SECOND).astype(np.int64), 1)
        pos = cursor + np.cumsum(steps)
        inside = pos[pos < end]
        out.append(inside)
        total += inside.size
        if inside.size < pos.size:
            break
        if total > MAX_ARRIVALS_PER_BIN:
            raise GenerationError("more than a million arrivals in one bin; the ensemble is degenerate")
        cursor = int(pos[-1])
    return np.concatenate(out)


def generate_day(
    date: dt.date,
    global_label: int,
    weekday_cluster: int,
    grid: BinGrid,
    ensemble: ModelEnsemble,
    rng: np.random.Generator,
) -> np.ndarray:
    """Sorted arrival instants (microseconds) for one day; NoData weekdays stay empty."""
    if weekday_cluster == NODATA:
        return np.empty(0, dtype=np.int64)
    midnight = day_number_of_date(date) * US_PER_DAY
    edges = grid.boundaries
    parts = []
    for l in range(grid.n_bins):
        model = ensemble.get((global_label, weekday_cluster, l + 1))
        if model is None:
            continue
        parts.append(_bin_arrivals(model, rng, midnight + int(edges[l]), midnight + int(edges[l + 1])))
    if not parts:
        return np.empty(0, dtype=np.int64)
    return np.concatenate(parts)


@dataclass(frozen=True)
class GenerationConfig:
    start: int  # instant in microseconds; arrivals before it are dropped
    n_days: int | None = None
    n_cases: int | None = None
    seed: int = 0

    def __post_init__(self):
        if (self.n_days is None) == (self.n_cases is None):
            raise ConfigurationError("give exactly one of n_days or n_cases")
        if (self.n_days is not None and self.n_days < 0) or (self.n_cases is not None and self.n_cases < 0):
            raise ConfigurationError("horizon must be non-negative")


@dataclass(frozen=True)
class GeneratedArrivals:
    days: tuple[DayArrivals, ...]

    def timestamps(self) -> np.ndarray:
        if not self.days:
            return np.empty(0, dtype=np.int64)
        return np.concatenate([d.timestamps for d in self.days]).astype(np.int64)

    @property
    def n_arrivals(self) -> int:
        return int(sum(len(d) for d in self.days))


def day_rng(seed: int, day_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, day_index])


def generate_arrivals(
    config: GenerationConfig,
    schedule: SegmentSchedule,
    weekdays: WeekdayClusterMap,
    grid: BinGrid,
    ensemble: ModelEnsemble,
    expected_daily: float | None = None,
) -> GeneratedArrivals:
    """Run the day loop over the configured horizon.

    With a case-count horizon, days are generated until the target is met and
    the last day is truncated; the search gives up after ten times the
    expected number of days (``expected_daily`` arrivals per day, or one per
    day when unknown).
    """
    first_day = int(day_number(config.start))
    if config.n_days is not None:
        limit = config.n_days
    else:
        per_day = expected_daily if expected_daily and expected_daily > 0 else 1.0
        limit = 10 * max(1, math.ceil(config.n_cases / per_day))
    days = []
    total = 0
    for i in range(limit):
        if config.n_cases is not None and total >= config.n_cases:
            break
        date = date_of_day_number(first_day + i)
        j = schedule.label(i)
        k = weekdays.label(j, date.isoweekday())
        stamps = generate_day(date, j, k, grid, ensemble, day_rng(config.seed, i))
        if i == 0:
            stamps = stamps[stamps >= config.start]
        if config.n_cases is not None:
            stamps = stamps[:config.n_cases - total]
        total += stamps.size
        days.append(DayArrivals(date, stamps))
    if config.n_cases is not None and total < config.n_cases:
        raise GenerationError(
            f"only {total} of {config.n_cases} cases generated within {limit} days; "
            "the ensemble produces too few arrivals (all weekdays NoData?)"
        )
    return GeneratedArrivals(tuple(days))
