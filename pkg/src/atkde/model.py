"""End-to-end AT-KDE fitting and the serializable arrival model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping


from .divide import DivideConfig, GlobalClustering, cluster_global_segments
from .errors import ModelFileError, SplitError
from .evaluate import cadd
from .eventlog import ArrivalDataset, SplitSpec, day_number, day_number_of_date, temporal_split
from .generate import GeneratedArrivals, GenerationConfig, SegmentSchedule, estimate_segment_schedule, generate_arrivals
from .kde import (BandwidthSearchConfig, ModelEnsemble, cell_key, fit_ensemble, ground_bandwidths, scale_ensemble,
                  tune_bandwidth_factor)
from .partition import (BinGrid, TrainingPartition, WeekdayClusterMap, build_partition, cluster_weekdays,
                        determine_bounds, make_bin_grid)

MODEL_FORMAT = "atkde-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class AtKdeConfig:
    divide: DivideConfig = DivideConfig()
    bandwidth: BandwidthSearchConfig = BandwidthSearchConfig()
    n_bins: int = 3
    min_silhouette: float = 0.25
    tuning_seed: int = 0


@dataclass(frozen=True)
class Structure:
    globals: GlobalClustering
    weekdays: WeekdayClusterMap
    grid: BinGrid
    partition: TrainingPartition


def fit_structure(train: ArrivalDataset, config: AtKdeConfig) -> Structure:
    """Steps 1-3: global clusters, weekday clusters, bins and the cell partition."""
    globals_ = cluster_global_segments(train, config.divide)
    weekdays = cluster_weekdays(globals_, config.min_silhouette)
    grid = make_bin_grid(*determine_bounds(train), config.n_bins)
    return Structure(globals_, weekdays, grid, build_partition(train, globals_, weekdays, grid))


@dataclass
class ArrivalModel:
    labels: tuple[int, ...]
    lengths: tuple[int, ...]
    window: int
    last_train_day: int  # days since epoch
    weekdays: WeekdayClusterMap
    grid: BinGrid
    ensemble: ModelEnsemble
    expected_daily: float
    default_start: int | None = None
    default_days: int | None = None
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def from_structure(cls, train: ArrivalDataset, structure: Structure, ensemble: ModelEnsemble,
                       window: int, **kw) -> "ArrivalModel":
        g = structure.globals
        return cls(
            labels=tuple(g.labels),
            lengths=tuple(s.length for s in g.segments),
            window=window,
            last_train_day=day_number_of_date(train.last_date),
            weekdays=structure.weekdays,
            grid=structure.grid,
            ensemble=ensemble,
            expected_daily=train.n_arrivals / max(train.n_days, 1),
            **kw,
        )

    def schedule(self, start: int) -> SegmentSchedule:
        offset = int(day_number(start)) - self.last_train_day
        return estimate_segment_schedule(self.labels, self.lengths, self.window, offset)

    def generate(self, config: GenerationConfig) -> GeneratedArrivals:
        return generate_arrivals(config, self.schedule(config.start), self.weekdays, self.grid, self.ensemble,
                                 self.expected_daily)

    def generate_window(self, seed: int = 0) -> GeneratedArrivals:
        """Generate over the stored default window (the held-out period)."""
        if self.default_start is None or self.default_days is None:
            raise ValueError("model has no default simulation window")
        return self.generate(GenerationConfig(self.default_start, n_days=self.default_days, seed=seed))

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "labels": list(self.labels),
            "segment_lengths": list(self.lengths),
            "window": self.window,
            "last_train_day": self.last_train_day,
            "weekday_clusters": self.weekdays.to_dict(),
            "bins": {"lower_us": self.grid.lower, "upper_us": self.grid.upper, "count": self.grid.n_bins},
            "ensemble": self.ensemble.to_dict(),
            "expected_daily": self.expected_daily,
            "default_start": self.default_start,
            "default_days": self.default_days,
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ArrivalModel":
        if not isinstance(data, Mapping) or data.get("format") != MODEL_FORMAT:
            raise ModelFileError("not an AT-KDE model file")
        if data.get("version") != MODEL_VERSION:
            raise ModelFileError(f"unsupported model version {data.get('version')!r}")
        try:
            bins = data["bins"]
            return cls(
                labels=tuple(int(v) for v in data["labels"]),
                lengths=tuple(int(v) for v in data["segment_lengths"]),
                window=int(data["window"]),
                last_train_day=int(data["last_train_day"]),
                weekdays=WeekdayClusterMap.from_dict(data["weekday_clusters"]),
                grid=BinGrid(int(bins["lower_us"]), int(bins["upper_us"]), int(bins["count"])),
                ensemble=ModelEnsemble.from_dict(data["ensemble"]),
                expected_daily=float(data["expected_daily"]),
                default_start=data.get("default_start"),
                default_days=data.get("default_days"),
                diagnostics=dict(data.get("diagnostics", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFileError(f"malformed model file: {exc}") from exc


def _validation_scorer(train: ArrivalDataset, config: AtKdeConfig):
    """Score function for the factor search, built on an inner temporal split of ``train``."""
    try:
        inner_train, inner_val = temporal_split(train, SplitSpec(1.0 - config.bandwidth.validation_fraction))
    except SplitError:
        return None
    if inner_train.n_arrivals < 2 or inner_val.n_arrivals < 1:
        return None
    structure = fit_structure(inner_train, config)
    ground = ground_bandwidths(structure.partition)
    if not ground:
        return None
    val_ts = inner_val.timestamps()
    start = int(val_ts[0])

    def score(factor: float, seed: int) -> float:
        model = ArrivalModel.from_structure(inner_train, structure, scale_ensemble(ground, factor),
                                            config.divide.window)
        sim = model.generate(GenerationConfig(start, n_days=inner_val.n_days,
                                              seed=config.tuning_seed * 1000 + seed)).timestamps()
        return cadd(val_ts, sim).sqrt_cadd if sim.size else math.inf

    return score


def fit_atkde(
    train: ArrivalDataset,
    config: AtKdeConfig = AtKdeConfig(),
    test: ArrivalDataset | None = None,
    factor: float | None = None,
) -> ArrivalModel:
    """Fit the full pipeline on ``train``.

    The bandwidth factor is searched on an inner split unless ``factor`` is
    given. The default simulation window starts right after the last training
    arrival and runs through the last day of ``test`` when supplied, otherwise
    for ``validation_fraction`` of the training days.
    """
    search = None
    if factor is None:
        search = tune_bandwidth_factor(_validation_scorer(train, config), config.bandwidth)
        factor = search.factor
    structure = fit_structure(train, config)
    ensemble = fit_ensemble(structure.partition, factor)

    default_start = int(train.timestamps()[-1]) + 1
    if test is not None and test.n_arrivals:
        default_days = int(day_number(int(test.timestamps()[-1])) - day_number(default_start)) + 1
    else:
        default_days = max(1, round(train.n_days * config.bandwidth.validation_fraction))

    g = structure.globals
    diagnostics = {
        "daily_counts": g.diagnostics.get("daily_counts"),
        "moving_average": g.diagnostics.get("moving_average"),
        "differences": g.diagnostics.get("differences"),
        "sensitivity": g.sensitivity,
        "fallback": g.fallback,
        "change_points": list(g.change_points),
        "labels": list(g.labels),
        "weekday_clusters": structure.weekdays.to_dict(),
        "cell_sample_counts": {cell_key(k): v for k, v in sorted(structure.partition.sample_counts().items())},
        "bandwidth_factor": factor,
        "factor_scores": {repr(f): s for f, s in search.scores.items()} if search else {},
    }
    return ArrivalModel.from_structure(train, structure, ensemble, config.divide.window,
                                       default_start=default_start, default_days=default_days,
                                       diagnostics=diagnostics)
