"""Weekday clustering inside each global cluster and intraday binning of the training data."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from sklearn.metrics import silhouette_score

from .divide import GlobalClustering, renumber, segment_features, standardize
from .errors import ConfigurationError, EmptyInputError
from .eventlog import US_PER_DAY, US_PER_SECOND, ArrivalDataset, DayArrivals, clock_us

NODATA = 0
WEEKDAYS = range(1, 8)
HALF_HOUR_US = 30 * 60 * US_PER_SECOND

Cell = tuple[int, int, int]  # (global cluster, weekday cluster, bin)


@dataclass(frozen=True)
class WeekdayClusterMap:
    """Per global cluster: weekday (1..7) -> weekday-cluster label, ``NODATA`` for empty weekdays."""

    mapping: dict[int, dict[int, int]]

    def label(self, global_label: int, weekday: int) -> int:
        return self.mapping[global_label][weekday]

    def n_clusters(self, global_label: int) -> int:
        """Number of weekday clusters, counting the NoData group when present."""
        return len(set(self.mapping[global_label].values()))

    def nodata_weekdays(self, global_label: int) -> list[int]:
        return [w for w, k in self.mapping[global_label].items() if k == NODATA]

    def to_dict(self) -> dict:
        return {str(j): {str(w): k for w, k in m.items()} for j, m in self.mapping.items()}

    @classmethod
    def from_dict(cls, data: Mapping) -> "WeekdayClusterMap":
        return cls({int(j): {int(w): int(k) for w, k in m.items()} for j, m in data.items()})


def cut_dendrogram(features: np.ndarray, min_silhouette: float = 0.25) -> list[int]:
    """Ward clustering of standardized rows, cut at the count with the best silhouette.

    Candidate counts run from 2 to ``n - 1``. Fewer than three rows, identical
    rows, or a best silhouette under ``min_silhouette`` yield a single cluster.
    """
    n = features.shape[0]
    if n < 3 or np.allclose(features, features[0]):
        return [1] * n
    tree = linkage(features, method="ward")
    best, best_score = None, -np.inf
    for k in range(2, n):
        labels = fcluster(tree, t=k, criterion="maxclust")
        if len(set(labels)) < 2:
            continue
        score = silhouette_score(features, labels)
        if score > best_score + 1e-12:
            best, best_score = labels, score
    if best is None or best_score < min_silhouette:
        return [1] * n
    return renumber(best.tolist())


def weekday_features(days: Sequence[DayArrivals]) -> dict[int, np.ndarray]:
    """Six-statistic vectors for each weekday that has at least one arrival."""
    by_weekday: dict[int, list[DayArrivals]] = {w: [] for w in WEEKDAYS}
    for day in days:
        by_weekday[day.weekday].append(day)
    return {
        w: segment_features(group).vector()
        for w, group in by_weekday.items()
        if sum(len(d) for d in group) > 0
    }


def cluster_weekdays(globals_: GlobalClustering, min_silhouette: float = 0.25) -> WeekdayClusterMap:
    mapping: dict[int, dict[int, int]] = {}
    for j, days in sorted(globals_.clusters().items()):
        feats = weekday_features(days)
        populated = sorted(feats)
        labels = cut_dendrogram(standardize(np.vstack([feats[w] for w in populated])), min_silhouette) \
            if populated else []
        wtc = {w: NODATA for w in WEEKDAYS}
        wtc.update(zip(populated, labels))
        mapping[j] = wtc
    return WeekdayClusterMap(mapping)


def determine_bounds(dataset: ArrivalDataset) -> tuple[int, int]:
    """Earliest and latest clock time (microseconds after midnight) of any arrival.

    A zero-width range is widened by half an hour each way, staying within the day.
    """
    ts = dataset.timestamps()
    if ts.size == 0:
        raise EmptyInputError("cannot determine working-hour bounds without arrivals")
    clocks = clock_us(ts)
    lower, upper = int(clocks.min()), int(clocks.max())
    if lower == upper:
        lower = max(0, lower - HALF_HOUR_US)
        upper = min(US_PER_DAY - 1, upper + HALF_HOUR_US)
    return lower, upper


@dataclass(frozen=True)
class BinGrid:
    lower: int
    upper: int
    n_bins: int

    def __post_init__(self):
        if self.n_bins < 1:
            raise ConfigurationError(f"need at least one bin, got {self.n_bins}")
        if not self.lower < self.upper:
            raise ConfigurationError("lower bound must precede upper bound")

    @property
    def boundaries(self) -> np.ndarray:
        span = self.upper - self.lower
        return np.array([self.lower + span * i // self.n_bins for i in range(self.n_bins + 1)], dtype=np.int64)

    def bin_of(self, clock) -> np.ndarray:
        """0-based bin index; values outside the range are clamped to the nearest bin."""
        inner = self.boundaries[1:-1]
        return np.searchsorted(inner, np.asarray(clock), side="right")


def make_bin_grid(lower: int, upper: int, n_bins: int) -> BinGrid:
    return BinGrid(lower, upper, n_bins)


@dataclass
class PartitionCell:
    timestamps: list[np.ndarray] = field(default_factory=list)
    gaps: list[np.ndarray] = field(default_factory=list)

    def arrivals(self) -> np.ndarray:
        return np.concatenate(self.timestamps) if self.timestamps else np.empty(0, dtype=np.int64)

    def interarrivals(self) -> np.ndarray:
        """Inter-arrival seconds pooled over days, each taken within one (day, bin)."""
        return np.concatenate(self.gaps) if self.gaps else np.empty(0)


@dataclass(frozen=True)
class TrainingPartition:
    cells: dict[Cell, PartitionCell]

    def sample_counts(self) -> dict[Cell, int]:
        return {key: int(cell.interarrivals().size) for key, cell in self.cells.items()}


def build_partition(
    train: ArrivalDataset,
    globals_: GlobalClustering,
    weekdays: WeekdayClusterMap,
    grid: BinGrid,
) -> TrainingPartition:
    day_labels = globals_.day_labels()
    if day_labels.size != train.n_days:
        raise ValueError("global clustering does not match the training dataset")
    cells: dict[Cell, PartitionCell] = {}
    for day, j in zip(train.days, day_labels):
        if len(day) == 0:
            continue
        k = weekdays.label(int(j), day.weekday)
        bins = grid.bin_of(clock_us(day.timestamps))
        # timestamps are sorted, so bins are non-decreasing
        cuts = np.searchsorted(bins, np.arange(grid.n_bins + 1))
        for l in range(grid.n_bins):
            chunk = day.timestamps[cuts[l]:cuts[l + 1]]
            if chunk.size == 0:
                continue
            cell = cells.setdefault((int(j), k, l + 1), PartitionCell())
            cell.timestamps.append(chunk)
            if chunk.size > 1:
                cell.gaps.append(np.diff(chunk) / US_PER_SECOND)
    return TrainingPartition(cells)
