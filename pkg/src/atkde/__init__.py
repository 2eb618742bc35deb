"""Adaptive time-dependent KDE models of business-process case arrivals."""

from .baselines import BaselineModel, fit_best_distribution, fit_mean, generate_baseline
from .divide import DivideConfig, GlobalClustering, cluster_global_segments
from .errors import AtKdeError
from .evaluate import CaddReport, benchmark_run, cadd, emd_1d, hourly_histogram
from .eventlog import ArrivalDataset, DayArrivals, SplitSpec, derive_arrivals, parse_event_log, temporal_split
from .generate import GeneratedArrivals, GenerationConfig, estimate_segment_schedule, generate_arrivals
from .kde import BandwidthSearchConfig, KdeModel, ModelEnsemble, fit_ensemble, silverman_bandwidth
from .model import ArrivalModel, AtKdeConfig, fit_atkde
from .partition import BinGrid, TrainingPartition, build_partition, cluster_weekdays

__version__ = "0.1.0"

__all__ = [
    "ArrivalDataset", "ArrivalModel", "AtKdeConfig", "AtKdeError", "BandwidthSearchConfig", "BaselineModel",
    "BinGrid", "CaddReport", "DayArrivals", "DivideConfig", "GeneratedArrivals", "GenerationConfig",
    "GlobalClustering", "KdeModel", "ModelEnsemble", "SplitSpec", "TrainingPartition", "benchmark_run",
    "build_partition", "cadd", "cluster_global_segments", "cluster_weekdays", "derive_arrivals", "emd_1d",
    "estimate_segment_schedule", "fit_atkde", "fit_best_distribution", "fit_ensemble", "fit_mean",
    "generate_arrivals", "generate_baseline", "hourly_histogram", "parse_event_log", "silverman_bandwidth",
    "temporal_split",
]
