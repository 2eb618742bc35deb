"""Gaussian kernel density models over inter-arrival seconds and the bandwidth-factor search."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ConfigurationError
from .partition import Cell, TrainingPartition

log = logging.getLogger(__name__)

FLOOR_BANDWIDTH = 1.0  # seconds
MAX_REJECTIONS = 100
DEFAULT_FACTOR_GRID = (0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 200.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def silverman_bandwidth(samples: Sequence[float]) -> float:
    """Robust Silverman rule ``0.9 * min(std, IQR / 1.34) * n ** -0.2``.

    The IQR term is skipped when it is zero (heavily tied data) so that a
    positive spread still gives a positive bandwidth. Fewer than two samples
    or zero spread yield ``FLOOR_BANDWIDTH``.
    """
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < 2 or x.min() == x.max():  # exact test; std of identical floats can be ~1e-12
        return FLOOR_BANDWIDTH
    sigma = float(x.std(ddof=1))
    q1, q3 = np.percentile(x, [25, 75])
    iqr = float(q3 - q1)
    spread = min(sigma, iqr / 1.34) if iqr > 0 else sigma
    return 0.9 * spread * n ** -0.2


@dataclass(frozen=True, eq=False)
class KdeModel:
    samples: np.ndarray
    bandwidth: float

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))
        if self.samples.size < 1:
            raise ConfigurationError("a KDE needs at least one sample")
        if not self.bandwidth > 0:
            raise ConfigurationError(f"bandwidth must be positive, got {self.bandwidth}")

    @property
    def n(self) -> int:
        return int(self.samples.size)

    def density(self, x) -> np.ndarray:
        """f(x) = 1/(n h) * sum_i phi((x - X_i) / h) with the standard normal kernel."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty(x.shape)
        # chunk to bound memory at n * chunk floats
        step = max(1, 2_000_000 // self.n)
        for start in range(0, x.size, step):
            u = (x[start:start + step, None] - self.samples[None, :]) / self.bandwidth
            out[start:start + step] = np.exp(-0.5 * u * u).sum(axis=1)
        return out * (_INV_SQRT_2PI / (self.n * self.bandwidth))

    def sample(self, rng: np.random.Generator, size: int | None = None):
        """Smoothed bootstrap: a random data point plus kernel noise, negatives redrawn.

        After ``MAX_REJECTIONS`` failed redraws a value is set to 0.
        """
        m = 1 if size is None else int(size)
        out = self.samples[rng.integers(0, self.n, m)] + self.bandwidth * rng.standard_normal(m)
        bad = np.flatnonzero(out < 0)
        for _ in range(MAX_REJECTIONS):
            if bad.size == 0:
                break
            redraw = self.samples[rng.integers(0, self.n, bad.size)] + self.bandwidth * rng.standard_normal(bad.size)
            out[bad] = redraw
            bad = bad[redraw < 0]
        out[bad] = 0.0
        return float(out[0]) if size is None else out

    def to_dict(self) -> dict:
        return {"samples": self.samples.tolist(), "bandwidth": self.bandwidth}

    @classmethod
    def from_dict(cls, data: Mapping) -> "KdeModel":
        return cls(np.asarray(data["samples"], dtype=float), float(data["bandwidth"]))


def cell_key(cell: Cell) -> str:
    return ",".join(str(c) for c in cell)


def parse_cell_key(text: str) -> Cell:
    j, k, l = (int(p) for p in text.split(","))
    return j, k, l


@dataclass(frozen=True)
class ModelEnsemble:
    models: dict[Cell, KdeModel]
    factor: float = 1.0

    def get(self, cell: Cell) -> KdeModel | None:
        return self.models.get(cell)

    def to_dict(self) -> dict:
        return {
            "factor": self.factor,
            "cells": [{"key": list(key), **self.models[key].to_dict()} for key in sorted(self.models)],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ModelEnsemble":
        models = {tuple(int(v) for v in c["key"]): KdeModel.from_dict(c) for c in data["cells"]}
        return cls(models, float(data["factor"]))


def ground_bandwidths(partition: TrainingPartition) -> dict[Cell, tuple[np.ndarray, float]]:
    """Samples and Silverman bandwidth of every cell holding at least one inter-arrival."""
    out = {}
    for key, cell in sorted(partition.cells.items()):
        gaps = cell.interarrivals()
        if gaps.size:
            out[key] = (gaps, silverman_bandwidth(gaps))
    return out


def scale_ensemble(ground: Mapping[Cell, tuple[np.ndarray, float]], factor: float) -> ModelEnsemble:
    return ModelEnsemble({key: KdeModel(x, factor * h) for key, (x, h) in ground.items()}, factor)


def fit_ensemble(partition: TrainingPartition, factor: float = 1.0) -> ModelEnsemble:
    return scale_ensemble(ground_bandwidths(partition), factor)


@dataclass(frozen=True)
class BandwidthSearchConfig:
    factor_grid: tuple[float, ...] = DEFAULT_FACTOR_GRID
    validation_fraction: float = 0.2
    seeds_per_candidate: int = 3

    def __post_init__(self):
        if not self.factor_grid or any(not 0 < f <= 200 for f in self.factor_grid):
            raise ConfigurationError("factor grid must be non-empty and within (0, 200]")
        if list(self.factor_grid) != sorted(self.factor_grid):
            raise ConfigurationError("factor grid must be ascending")
        if not 0 < self.validation_fraction < 1:
            raise ConfigurationError("validation_fraction must lie in (0, 1)")
        if self.seeds_per_candidate < 1:
            raise ConfigurationError("seeds_per_candidate must be >= 1")


@dataclass
class FactorSearch:
    factor: float
    scores: dict[float, list[float]] = field(default_factory=dict)

    def mean_scores(self) -> dict[float, float]:
        return {f: float(np.mean(s)) for f, s in self.scores.items()}


def tune_bandwidth_factor(
    score: Callable[[float, int], float] | None,
    config: BandwidthSearchConfig = BandwidthSearchConfig(),
) -> FactorSearch:
    """Pick the grid factor with the lowest mean validation score.

    ``score(factor, seed)`` returns the validation error of one generation run;
    ``None`` means no validation data exists, in which case 1.0 is returned.
    Ties go to the smaller factor.
    """
    grid = config.factor_grid
    if len(grid) == 1:
        return FactorSearch(grid[0])
    if score is None:
        log.warning("no validation arrivals for bandwidth tuning; using factor 1.0")
        return FactorSearch(1.0)
    result = FactorSearch(grid[0])
    best = math.inf
    for factor in grid:
        runs = [score(factor, seed) for seed in range(config.seeds_per_candidate)]
        result.scores[factor] = runs
        mean = float(np.mean(runs))
        if mean < best:
            best, result.factor = mean, factor
    return result
