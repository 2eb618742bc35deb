"""Event-log ingestion, case-arrival extraction and the temporal train/test split.

All instants are kept as integer microseconds since the Unix epoch (UTC).
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, EmptyInputError, EventLogError, SplitError

US_PER_SECOND = 1_000_000
US_PER_DAY = 86_400 * US_PER_SECOND
EPOCH = dt.datetime(1970, 1, 1, tzinfo=dt.timezone.utc)
EPOCH_DATE = EPOCH.date()


def parse_instant(text: str) -> int:
    """Parse an ISO-8601 timestamp into UTC microseconds. Naive values are taken as UTC."""
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    stamp = dt.datetime.fromisoformat(text)
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=dt.timezone.utc)
    delta = stamp - EPOCH
    return (delta.days * 86_400 + delta.seconds) * US_PER_SECOND + delta.microseconds


def format_instant(us: int) -> str:
    """Canonical ISO-8601 rendering, always with microseconds and a ``Z`` suffix."""
    stamp = EPOCH + dt.timedelta(microseconds=int(us))
    return stamp.strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def day_number(us) -> np.ndarray | int:
    """Days since 1970-01-01 for instants given in microseconds."""
    return np.floor_divide(us, US_PER_DAY)


def date_of_day_number(n: int) -> dt.date:
    return EPOCH_DATE + dt.timedelta(days=int(n))


def day_number_of_date(date: dt.date) -> int:
    return (date - EPOCH_DATE).days


def clock_us(us) -> np.ndarray | int:
    """Microseconds elapsed since midnight (UTC) of the instant's own day."""
    return np.mod(us, US_PER_DAY)


@dataclass(frozen=True)
class EventRecord:
    case_id: str
    timestamp: int
    activity: str | None = None


@dataclass(frozen=True, eq=False)
class DayArrivals:
    """Sorted arrival instants falling on one calendar day."""

    date: dt.date
    timestamps: np.ndarray

    @property
    def weekday(self) -> int:
        """ISO weekday, Monday=1 .. Sunday=7."""
        return self.date.isoweekday()

    def __len__(self) -> int:
        return len(self.timestamps)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DayArrivals):
            return NotImplemented
        return self.date == other.date and np.array_equal(self.timestamps, other.timestamps)


@dataclass(frozen=True, eq=False)
class ArrivalDataset:
    """Per-day arrival sequences covering every calendar day from first to last arrival."""

    days: tuple[DayArrivals, ...]

    @classmethod
    def from_timestamps(cls, timestamps: Iterable[int]) -> "ArrivalDataset":
        if not isinstance(timestamps, np.ndarray):
            timestamps = np.fromiter(timestamps, dtype=np.int64)
        ts = np.sort(timestamps.astype(np.int64, copy=False))
        if ts.size == 0:
            return cls(days=())
        day_ids = day_number(ts)
        first, last = int(day_ids[0]), int(day_ids[-1])
        bounds = np.searchsorted(day_ids, np.arange(first, last + 2))
        days = tuple(
            DayArrivals(date_of_day_number(first + i), ts[bounds[i]:bounds[i + 1]])
            for i in range(last - first + 1)
        )
        return cls(days=days)

    @classmethod
    def from_days(cls, days: Sequence[DayArrivals]) -> "ArrivalDataset":
        """Build from an explicit day sequence, keeping leading/trailing empty days."""
        return cls(days=tuple(days))

    @property
    def n_days(self) -> int:
        return len(self.days)

    @property
    def n_arrivals(self) -> int:
        return int(sum(len(d) for d in self.days))

    @property
    def first_date(self) -> dt.date:
        return self.days[0].date

    @property
    def last_date(self) -> dt.date:
        return self.days[-1].date

    def timestamps(self) -> np.ndarray:
        if not self.days:
            return np.empty(0, dtype=np.int64)
        return np.concatenate([d.timestamps for d in self.days]).astype(np.int64)

    def counts(self) -> np.ndarray:
        return np.array([len(d) for d in self.days], dtype=np.int64)

    def __len__(self) -> int:
        return self.n_days

    def __eq__(self, other) -> bool:
        if not isinstance(other, ArrivalDataset):
            return NotImplemented
        return len(self.days) == len(other.days) and all(a == b for a, b in zip(self.days, other.days))


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigurationError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")


def parse_event_log(
    path: str | Path,
    case_column: str = "case_id",
    timestamp_column: str = "timestamp",
    activity_column: str | None = None,
) -> list[EventRecord]:
    """Read a CSV event log into records, in file order.

    Raises:
        ConfigurationError: a mapped column is missing from the header.
        EventLogError: a row has an empty case id or an unparseable timestamp;
            the message names the 1-based file line.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        wanted = [case_column, timestamp_column] + ([activity_column] if activity_column else [])
        missing = [c for c in wanted if c not in header]
        if missing:
            raise ConfigurationError(f"{path}: missing column(s) {', '.join(missing)}; header has {header}")
        records = []
        for row in reader:
            line = reader.line_num
            case_id = (row[case_column] or "").strip()
            if not case_id:
                raise EventLogError(f"{path}: line {line}: empty case id")
            raw = row[timestamp_column] or ""
            try:
                stamp = parse_instant(raw)
            except ValueError as exc:
                raise EventLogError(f"{path}: line {line}: unparseable timestamp {raw!r}") from exc
            activity = row[activity_column] if activity_column else None
            records.append(EventRecord(case_id, stamp, activity))
    return records


def case_arrivals(records: Sequence[EventRecord]) -> list[tuple[int, str]]:
    """(arrival, case_id) pairs ordered by timestamp, ties broken by case id."""
    first_seen: dict[str, int] = {}
    for rec in records:
        prev = first_seen.get(rec.case_id)
        if prev is None or rec.timestamp < prev:
            first_seen[rec.case_id] = rec.timestamp
    return sorted((t, c) for c, t in first_seen.items())


def derive_arrivals(records: Sequence[EventRecord]) -> ArrivalDataset:
    """One arrival per case: its earliest event timestamp."""
    if not records:
        raise EmptyInputError("cannot derive arrivals from an empty event log")
    return ArrivalDataset.from_timestamps(np.array([t for t, _ in case_arrivals(records)], dtype=np.int64))


def train_count(total: int, fraction: float) -> int:
    # round() guards against float noise such as 0.7 * 10 = 7.000000000000001
    n = math.ceil(round(fraction * total, 9))
    return min(max(n, 1), total - 1)


def temporal_split(dataset: ArrivalDataset, spec: SplitSpec = SplitSpec()) -> tuple[ArrivalDataset, ArrivalDataset]:
    """Split arrival-ordered cases: the first ceil(fraction * total) go to train.

    The day holding the boundary is cut at the boundary instant, so both
    parts may contain that date.
    """
    ts = dataset.timestamps()
    if ts.size < 2:
        raise SplitError(f"need at least 2 arrivals to split, got {ts.size}")
    ts = np.sort(ts)
    n_train = train_count(ts.size, spec.train_fraction)
    return ArrivalDataset.from_timestamps(ts[:n_train]), ArrivalDataset.from_timestamps(ts[n_train:])


def write_arrivals_csv(dataset: ArrivalDataset, path: str | Path) -> None:
    """Canonical arrival file: ``date,timestamp`` rows sorted ascending."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(render_arrivals_csv(dataset))


def render_arrivals_csv(dataset: ArrivalDataset) -> str:
    lines = ["date,timestamp"]
    for day in dataset.days:
        iso = day.date.isoformat()
        lines.extend(f"{iso},{format_instant(t)}" for t in day.timestamps)
    return "\n".join(lines) + "\n"


def read_arrivals_csv(path: str | Path) -> ArrivalDataset:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:  # zero-byte file: no arrivals
            return ArrivalDataset(days=())
        if "timestamp" not in reader.fieldnames:
            raise ConfigurationError(f"{path}: missing column timestamp")
        stamps = []
        for row in reader:
            try:
                stamps.append(parse_instant(row["timestamp"]))
            except ValueError as exc:
                raise EventLogError(f"{path}: line {reader.line_num}: unparseable timestamp") from exc
    return ArrivalDataset.from_timestamps(stamps)
