"""Global segmentation: change points on smoothed daily counts, then segment clustering."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from sklearn.cluster import DBSCAN

from .errors import ConfigurationError, InsufficientDataError
from .eventlog import US_PER_SECOND, ArrivalDataset, DayArrivals

DEFAULT_SENSITIVITIES = tuple(round(0.1 * i, 1) for i in range(1, 11))


@dataclass(frozen=True)
class DivideConfig:
    window: int = 7
    sensitivities: tuple[float, ...] = DEFAULT_SENSITIVITIES
    max_clusters: int = 6
    dbscan_eps: float = 1.5
    dbscan_min_samples: int = 1

    def __post_init__(self):
        if self.window < 1:
            raise ConfigurationError("window must be >= 1")
        if not self.sensitivities or any(not 0 < z <= 1 for z in self.sensitivities):
            raise ConfigurationError("sensitivities must be non-empty values in (0, 1]")
        if list(self.sensitivities) != sorted(self.sensitivities):
            raise ConfigurationError("sensitivities must be ascending")
        if self.max_clusters < 2:
            raise ConfigurationError("max_clusters must be >= 2")


@dataclass(frozen=True)
class Segment:
    start: int  # inclusive, 0-based day index
    end: int  # inclusive
    days: tuple[DayArrivals, ...] = field(repr=False, default=())

    @property
    def length(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class SegmentFeatures:
    mean_daily_arrivals: float
    p25_daily_arrivals: float
    p75_daily_arrivals: float
    std_interarrival_seconds: float
    p25_interarrival_seconds: float
    p75_interarrival_seconds: float
    degenerate: bool = False

    def vector(self) -> np.ndarray:
        return np.array([
            self.mean_daily_arrivals, self.p25_daily_arrivals, self.p75_daily_arrivals,
            self.std_interarrival_seconds, self.p25_interarrival_seconds, self.p75_interarrival_seconds,
        ])


@dataclass(frozen=True)
class GlobalClustering:
    change_points: tuple[int, ...]
    segments: tuple[Segment, ...]
    labels: tuple[int, ...]
    sensitivity: float | None  # None when the single-cluster fallback was used
    diagnostics: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def n_clusters(self) -> int:
        return len(set(self.labels))

    @property
    def fallback(self) -> bool:
        return self.sensitivity is None

    def clusters(self) -> dict[int, list[DayArrivals]]:
        """Label -> union of the member segments' days, in temporal order."""
        out: dict[int, list[DayArrivals]] = {}
        for seg, lab in zip(self.segments, self.labels):
            out.setdefault(lab, []).extend(seg.days)
        return out

    def day_labels(self) -> np.ndarray:
        """Global cluster label of every day of the source dataset."""
        return np.concatenate([np.full(s.length, lab, dtype=np.int64) for s, lab in zip(self.segments, self.labels)])


def arrival_count_sequence(dataset: ArrivalDataset) -> np.ndarray:
    return dataset.counts()


def moving_average(counts: Sequence[float], window: int) -> np.ndarray:
    counts = np.asarray(counts, dtype=float)
    if counts.size < window:
        raise InsufficientDataError(f"need at least {window} values for a moving average, got {counts.size}")
    csum = np.concatenate([[0.0], np.cumsum(counts)])
    return (csum[window:] - csum[:-window]) / window


def sliding_window_differences(averages: Sequence[float], window: int) -> np.ndarray:
    """Difference between each moving average and the one a full window later."""
    averages = np.asarray(averages, dtype=float)
    if averages.size < window + 1:
        raise InsufficientDataError(f"need at least {window + 1} moving averages, got {averages.size}")
    return averages[window:] - averages[:-window]


def window_sum_differences(counts: Sequence[int], window: int) -> np.ndarray:
    """Integer form of the sliding-window differences (scaled by ``window``).

    Change-point detection is invariant under positive scaling of its input, so
    this exact integer series yields the same change points as the float one.
    """
    counts = np.asarray(counts, dtype=np.int64)
    if counts.size < 2 * window:
        raise InsufficientDataError(f"need at least {2 * window} days, got {counts.size}")
    csum = np.concatenate([[0], np.cumsum(counts)])
    sums = csum[window:] - csum[:-window]
    return sums[window:] - sums[:-window]


def _quantile(sorted_vals: list[Fraction], q: Fraction) -> Fraction:
    pos = (len(sorted_vals) - 1) * q
    lo = int(pos)
    frac = pos - lo
    if frac == 0:
        return sorted_vals[lo]
    return sorted_vals[lo] + frac * (sorted_vals[lo + 1] - sorted_vals[lo])


def outlier_indices(diffs: Sequence[float], sensitivity: float) -> list[int]:
    """Indices whose value lies strictly outside the z-scaled Tukey fences.

    Evaluated in exact rational arithmetic; quartiles interpolate linearly.
    """
    vals = [Fraction(v) for v in np.asarray(diffs).tolist()]
    if not vals:
        return []
    ordered = sorted(vals)
    q1 = _quantile(ordered, Fraction(1, 4))
    q3 = _quantile(ordered, Fraction(3, 4))
    cf = Fraction(3, 2) * (q3 - q1) * Fraction(sensitivity)
    lo, hi = q1 - cf, q3 + cf
    return [i for i, v in enumerate(vals) if v < lo or v > hi]


def collapse_runs(candidates: Sequence[int], diffs: Sequence[float]) -> list[int]:
    """Keep one index per run of consecutive candidates: the one with largest |diff|."""
    diffs = np.asarray(diffs)
    kept = []
    run: list[int] = []
    for idx in sorted(candidates):
        if run and idx != run[-1] + 1:
            kept.append(max(run, key=lambda i: (abs(diffs[i]), -i)))
            run = []
        run.append(idx)
    if run:
        kept.append(max(run, key=lambda i: (abs(diffs[i]), -i)))
    return kept


def detect_change_points(diffs: Sequence[float], sensitivity: float, window: int) -> list[int]:
    """Day indices (0-based) where a new regime starts.

    Difference index ``i`` compares the windows starting at days ``i`` and
    ``i + window``, so the change is anchored at day ``i + window``.
    """
    peaks = collapse_runs(outlier_indices(diffs, sensitivity), diffs)
    return [i + window for i in peaks]


def cut_segments(change_points: Sequence[int], dataset: ArrivalDataset) -> list[Segment]:
    n = dataset.n_days
    cps = sorted(set(change_points))
    if cps and (cps[0] < 1 or cps[-1] > n - 1):
        raise ValueError(f"change points must lie in [1, {n - 1}], got {cps}")
    starts = [0] + cps
    ends = [c - 1 for c in cps] + [n - 1]
    return [Segment(s, e, dataset.days[s:e + 1]) for s, e in zip(starts, ends)]


def interarrival_seconds(days: Sequence[DayArrivals]) -> np.ndarray:
    """Consecutive differences within each day; day boundaries are never crossed."""
    parts = [np.diff(d.timestamps) for d in days if len(d) > 1]
    if not parts:
        return np.empty(0)
    return np.concatenate(parts) / US_PER_SECOND


def segment_features(days: Sequence[DayArrivals]) -> SegmentFeatures:
    counts = np.array([len(d) for d in days], dtype=float)
    if counts.size == 0:
        return SegmentFeatures(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, degenerate=True)
    p25d, p75d = np.percentile(counts, [25, 75])
    gaps = interarrival_seconds(days)
    if counts.sum() < 2 or gaps.size == 0:
        return SegmentFeatures(float(counts.mean()), float(p25d), float(p75d), 0.0, 0.0, 0.0, degenerate=True)
    p25g, p75g = np.percentile(gaps, [25, 75])
    return SegmentFeatures(float(counts.mean()), float(p25d), float(p75d),
                           float(gaps.std()), float(p25g), float(p75g))


def standardize(matrix: np.ndarray) -> np.ndarray:
    """Zero mean, unit variance per column; constant columns become all zeros."""
    matrix = np.asarray(matrix, dtype=float)
    centered = matrix - matrix.mean(axis=0)
    scale = matrix.std(axis=0)
    out = np.zeros_like(centered)
    ok = scale > 0
    out[:, ok] = centered[:, ok] / scale[ok]
    return out


def renumber(raw_labels: Sequence[int]) -> list[int]:
    """Relabel to 1..J in order of first appearance."""
    mapping: dict[int, int] = {}
    return [mapping.setdefault(lab, len(mapping) + 1) for lab in raw_labels]


def cluster_segments(segments: Sequence[Segment], eps: float = 1.0, min_samples: int = 1) -> list[int]:
    if not segments:
        raise ValueError("no segments to cluster")
    if len(segments) == 1:
        return [1]
    feats = standardize(np.vstack([segment_features(s.days).vector() for s in segments]))
    raw = DBSCAN(eps=eps, min_samples=min_samples).fit(feats).labels_
    # with min_samples > 1 DBSCAN may emit noise (-1); give each noise point its own cluster
    next_label = raw.max() + 1
    fixed = []
    for lab in raw:
        if lab < 0:
            lab, next_label = next_label, next_label + 1
        fixed.append(int(lab))
    return renumber(fixed)


def merge_same_label(change_points: Sequence[int], labels: Sequence[int]) -> tuple[list[int], list[int]]:
    """Drop change points separating two neighbouring segments of the same cluster."""
    cps = sorted(change_points)
    kept = [c for c, a, b in zip(cps, labels, labels[1:]) if a != b]
    runs = [lab for i, lab in enumerate(labels) if i == 0 or lab != labels[i - 1]]
    return kept, renumber(runs)


def cluster_global_segments(dataset: ArrivalDataset, config: DivideConfig = DivideConfig()) -> GlobalClustering:
    """Search the sensitivity range for an admissible segmentation.

    Sensitivities are tried from the widest fences (largest z) down. For each,
    segments are clustered, neighbours sharing a cluster are merged, and the
    result is admissible when every segment spans at least ``window`` days,
    there are at least two segments, and fewer than ``max_clusters`` labels.
    Falls back to one cluster covering all days when nothing qualifies.
    """
    if dataset.n_days == 0:
        raise InsufficientDataError("empty dataset")
    counts = arrival_count_sequence(dataset)
    w = config.window
    diagnostics: dict = {"daily_counts": counts.tolist(), "window": w, "tried": []}
    whole = Segment(0, dataset.n_days - 1, dataset.days)
    fallback = GlobalClustering((), (whole,), (1,), None, diagnostics)
    if counts.size < 2 * w + 1:
        diagnostics["reason"] = "too few days for sliding-window differences"
        return fallback
    averages = moving_average(counts, w)
    diagnostics["moving_average"] = averages.tolist()
    diagnostics["differences"] = sliding_window_differences(averages, w).tolist()
    exact = window_sum_differences(counts, w)

    for z in sorted(config.sensitivities, reverse=True):
        raw = detect_change_points(exact, z, w)
        raw_labels = cluster_segments(cut_segments(raw, dataset), config.dbscan_eps, config.dbscan_min_samples)
        cps, labels = merge_same_label(raw, raw_labels)
        segments = cut_segments(cps, dataset)
        shortest = min(s.length for s in segments)
        admissible = shortest >= w and len(segments) >= 2 and len(set(labels)) < config.max_clusters
        diagnostics["tried"].append({"sensitivity": z, "raw_change_points": raw, "change_points": cps,
                                     "labels": labels,
                                     "admissible": admissible})
        if admissible:
            diagnostics["reason"] = "admissible"
            return GlobalClustering(tuple(cps), tuple(segments), tuple(labels), z, diagnostics)
    diagnostics["reason"] = "no admissible sensitivity"
    return fallback
