import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atkde.errors import ConfigurationError, EmptyInputError, EventLogError, SplitError
from atkde.eventlog import (US_PER_DAY, ArrivalDataset, EventRecord, SplitSpec, case_arrivals, derive_arrivals,
                            format_instant, parse_event_log, parse_instant, read_arrivals_csv, render_arrivals_csv,
                            temporal_split, train_count, write_arrivals_csv)

from conftest import MONDAY, at


def write(tmp_path, text, name="log.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_parse_two_records(tmp_path):
    path = write(tmp_path, "case_id,timestamp\nc1,2024-01-01T09:00:00Z\nc1,2024-01-01T10:00:00Z\n")
    records = parse_event_log(path)
    assert [r.case_id for r in records] == ["c1", "c1"]
    assert records[1].timestamp - records[0].timestamp == 3600 * 1_000_000


def test_parse_header_only(tmp_path):
    assert parse_event_log(write(tmp_path, "case_id,timestamp\n")) == []


def test_parse_bad_timestamp_names_line(tmp_path):
    path = write(tmp_path, "case_id,timestamp\nc1,not-a-date\n")
    with pytest.raises(EventLogError, match="line 2"):
        parse_event_log(path)


def test_parse_missing_column(tmp_path):
    path = write(tmp_path, "case,time\nc1,2024-01-01T09:00:00Z\n")
    with pytest.raises(ConfigurationError, match="case_id"):
        parse_event_log(path)


def test_parse_custom_columns_and_activity(tmp_path):
    path = write(tmp_path, "id,act,ts\nA,start,2024-01-01 09:00:00\n")
    (rec,) = parse_event_log(path, case_column="id", timestamp_column="ts", activity_column="act")
    assert rec == EventRecord("A", at(MONDAY, 9), "start")


def test_timezone_normalized_to_utc():
    assert parse_instant("2024-01-01T10:00:00+01:00") == parse_instant("2024-01-01T09:00:00Z")
    assert parse_instant("2024-01-01T09:00:00") == parse_instant("2024-01-01T09:00:00Z")


def test_format_round_trip():
    us = parse_instant("2024-03-05T07:08:09.123456Z")
    assert format_instant(us) == "2024-03-05T07:08:09.123456Z"
    assert parse_instant(format_instant(us)) == us


def test_derive_minimum_per_case():
    recs = [EventRecord("c1", at(MONDAY, 10)), EventRecord("c1", at(MONDAY, 9)), EventRecord("c2", at(MONDAY, 11))]
    ds = derive_arrivals(recs)
    assert ds.n_days == 1
    np.testing.assert_array_equal(ds.days[0].timestamps, [at(MONDAY, 9), at(MONDAY, 11)])


def test_derive_single_case():
    ds = derive_arrivals([EventRecord("x", at(MONDAY, 12))])
    assert ds.n_days == 1 and ds.n_arrivals == 1


def test_derive_materializes_interior_empty_day():
    recs = [EventRecord("a", at(MONDAY, 9)), EventRecord("b", at(MONDAY + dt.timedelta(days=2), 9))]
    ds = derive_arrivals(recs)
    # calendar enumerated by hand: Jan 1, Jan 2 (empty), Jan 3
    assert [d.date.day for d in ds.days] == [1, 2, 3]
    assert ds.counts().tolist() == [1, 0, 1]
    assert ds.days[1].weekday == 2


def test_derive_empty_raises():
    with pytest.raises(EmptyInputError):
        derive_arrivals([])


def test_case_arrivals_tie_order():
    recs = [EventRecord("b", 5), EventRecord("a", 5), EventRecord("c", 1)]
    assert case_arrivals(recs) == [(1, "c"), (5, "a"), (5, "b")]


def test_split_counts():
    ds = ArrivalDataset.from_timestamps([at(MONDAY, 9 + i * 0.1) for i in range(10)])
    train, test = temporal_split(ds, SplitSpec(0.8))
    assert (train.n_arrivals, test.n_arrivals) == (8, 2)
    two = ArrivalDataset.from_timestamps([at(MONDAY, 9), at(MONDAY, 10)])
    a, b = temporal_split(two, SplitSpec(0.5))
    assert (a.n_arrivals, b.n_arrivals) == (1, 1)


def test_split_twenty_over_five_days():
    stamps = [at(MONDAY + dt.timedelta(days=d), 9 + h) for d in range(5) for h in range(4)]
    train, test = temporal_split(ArrivalDataset.from_timestamps(stamps))
    # oracle: recount from the sorted list
    ordered = sorted(stamps)
    assert train.timestamps().tolist() == ordered[:16]
    assert test.timestamps().tolist() == ordered[16:]
    # 16 = 4 full days of 4 arrivals, so the boundary falls between days
    assert (train.n_days, test.n_days) == (4, 1)


def test_split_cuts_boundary_day():
    stamps = [at(MONDAY, 9 + h) for h in range(5)]
    train, test = temporal_split(ArrivalDataset.from_timestamps(stamps), SplitSpec(0.5))
    assert (train.n_arrivals, test.n_arrivals) == (3, 2)
    assert train.last_date == test.first_date == MONDAY


def test_split_errors():
    with pytest.raises(SplitError):
        temporal_split(ArrivalDataset.from_timestamps([1]))
    with pytest.raises(ConfigurationError):
        SplitSpec(1.0)


def test_train_count_float_noise():
    assert train_count(10, 0.7) == 7
    assert train_count(3, 0.5) == 2


def test_arrival_csv_round_trip(tmp_path):
    ds = ArrivalDataset.from_timestamps([at(MONDAY, 9.5), at(MONDAY + dt.timedelta(days=2), 13.25)])
    path = tmp_path / "arrivals.csv"
    write_arrivals_csv(ds, path)
    text = path.read_text()
    assert text.splitlines()[0] == "date,timestamp"
    again = read_arrivals_csv(path)
    assert again == ds
    assert render_arrivals_csv(again) == text


def test_read_empty_arrival_file(tmp_path):
    assert read_arrivals_csv(write(tmp_path, "")).n_arrivals == 0


stamps = st.lists(st.integers(0, 60 * US_PER_DAY), min_size=2, max_size=80)


@settings(max_examples=60, deadline=None)
@given(stamps, st.floats(0.05, 0.95))
def test_split_conservation(ts, fraction):
    ds = ArrivalDataset.from_timestamps(ts)
    train, test = temporal_split(ds, SplitSpec(fraction))
    assert train.n_arrivals + test.n_arrivals == len(ts)
    assert train.timestamps().max() <= test.timestamps().min()
    assert sorted(np.concatenate([train.timestamps(), test.timestamps()]).tolist()) == sorted(ts)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("abcdefgh"), st.integers(0, 10 * US_PER_DAY)), min_size=1, max_size=40))
def test_one_arrival_per_case(pairs):
    ds = derive_arrivals([EventRecord(c, t) for c, t in pairs])
    assert ds.n_arrivals == len({c for c, _ in pairs})
    # every calendar day from first to last is present
    assert ds.n_days == (ds.last_date - ds.first_date).days + 1
