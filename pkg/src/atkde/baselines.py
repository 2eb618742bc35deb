"""Static inter-arrival baselines with a working-day / daily-window calendar component."""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy import stats

from .divide import interarrival_seconds
from .errors import GenerationError, InsufficientDataError
from .eventlog import (US_PER_DAY, US_PER_SECOND, ArrivalDataset, DayArrivals, clock_us, date_of_day_number,
                       day_number, day_number_of_date)
from .generate import GeneratedArrivals, GenerationConfig, day_rng

FAMILIES = ("fixed", "exponential", "gamma", "lognormal", "normal", "uniform")
MAX_WINDOW_TRIES = 100


@dataclass(frozen=True)
class CalendarAugmentation:
    working_probability: dict[int, float]  # ISO weekday -> P(day has arrivals)
    first_times: np.ndarray  # clock microseconds of each populated day's first arrival
    last_times: np.ndarray

    def to_dict(self) -> dict:
        return {"working_probability": {str(w): p for w, p in self.working_probability.items()},
                "first_times": self.first_times.tolist(), "last_times": self.last_times.tolist()}

    @classmethod
    def from_dict(cls, data: Mapping) -> "CalendarAugmentation":
        return cls({int(w): float(p) for w, p in data["working_probability"].items()},
                   np.asarray(data["first_times"], dtype=np.int64), np.asarray(data["last_times"], dtype=np.int64))


def fit_calendar(train: ArrivalDataset) -> CalendarAugmentation:
    if train.n_days == 0:
        raise InsufficientDataError("empty training data")
    seen = {w: 0 for w in range(1, 8)}
    worked = {w: 0 for w in range(1, 8)}
    firsts, lasts = [], []
    for day in train.days:
        seen[day.weekday] += 1
        if len(day):
            worked[day.weekday] += 1
            firsts.append(clock_us(int(day.timestamps[0])))
            lasts.append(clock_us(int(day.timestamps[-1])))
    prob = {w: (worked[w] / seen[w] if seen[w] else 0.0) for w in range(1, 8)}
    return CalendarAugmentation(prob, np.asarray(firsts, dtype=np.int64), np.asarray(lasts, dtype=np.int64))


@dataclass(frozen=True)
class InterArrivalDistribution:
    """A fitted inter-arrival family; parameters are in seconds."""

    family: str
    params: dict[str, float]

    def frozen(self):
        p = self.params
        if self.family == "exponential":
            return stats.expon(scale=p["mean"])
        if self.family == "gamma":
            return stats.gamma(p["shape"], scale=p["scale"])
        if self.family == "lognormal":
            return stats.lognorm(p["sigma"], scale=math.exp(p["mu"]))
        if self.family == "normal":
            return stats.truncnorm(-p["mean"] / p["std"], np.inf, loc=p["mean"], scale=p["std"])
        if self.family == "uniform":
            return stats.uniform(p["low"], p["high"] - p["low"])
        raise ValueError(f"no scipy distribution for {self.family}")

    def cdf(self, x: np.ndarray) -> np.ndarray:
        if self.family == "fixed":
            return (np.asarray(x) >= self.params["value"]).astype(float)
        return self.frozen().cdf(x)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.family == "fixed":
            return np.full(size, self.params["value"])
        return np.maximum(self.frozen().rvs(size=size, random_state=rng), 0.0)

    @property
    def mean(self) -> float:
        if self.family == "fixed":
            return self.params["value"]
        return float(self.frozen().mean())


def ks_statistic(samples: np.ndarray, dist: InterArrivalDistribution) -> float:
    """Sup-distance between the empirical CDF and the model CDF, valid for step CDFs too."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if dist.family == "fixed":
        v = dist.params["value"]
        below = np.searchsorted(x, v, side="left") / n  # F_n(v-)
        at_or_below = np.searchsorted(x, v, side="right") / n
        return float(max(below, 1.0 - at_or_below))
    return float(stats.kstest(x, dist.cdf).statistic)


def _fit_family(family: str, x: np.ndarray) -> InterArrivalDistribution | None:
    pos = x[x > 0]
    mean, std = float(x.mean()), float(x.std())
    if family == "fixed":
        return InterArrivalDistribution("fixed", {"value": mean})
    if std <= 0:
        return None
    if family == "exponential":
        return InterArrivalDistribution("exponential", {"mean": mean}) if mean > 0 else None
    if family == "gamma":
        if pos.size < 2 or pos.std() <= 0:
            return None
        shape, _, scale = stats.gamma.fit(pos, floc=0)
        return InterArrivalDistribution("gamma", {"shape": float(shape), "scale": float(scale)})
    if family == "lognormal":
        if pos.size < 2:
            return None
        logs = np.log(pos)
        if logs.std() <= 0:
            return None
        return InterArrivalDistribution("lognormal", {"mu": float(logs.mean()), "sigma": float(logs.std())})
    if family == "normal":
        return InterArrivalDistribution("normal", {"mean": mean, "std": std})
    if family == "uniform":
        return InterArrivalDistribution("uniform", {"low": float(x.min()), "high": float(x.max())})
    raise ValueError(f"unknown family {family}")


def select_distribution(samples, tie_tolerance: float = 0.005) -> tuple[InterArrivalDistribution, dict[str, float]]:
    """Fit every candidate family and keep the one with the smallest KS statistic.

    Families within ``tie_tolerance`` of the best KS count as tied and the
    earliest in ``FAMILIES`` wins, so nested families (gamma over exponential)
    must beat the simpler one by a visible margin.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise InsufficientDataError("need at least 2 inter-arrival samples")
    fitted, scores = [], {}
    for family in FAMILIES:
        dist = _fit_family(family, x)
        if dist is None:
            continue
        scores[family] = ks_statistic(x, dist)
        fitted.append(dist)
    best = min(scores.values())
    chosen = next(d for d in fitted if scores[d.family] <= best + tie_tolerance)
    return chosen, scores


@dataclass(frozen=True)
class BaselineModel:
    """Mean or best-distribution inter-arrivals plus the calendar component."""

    name: str
    distribution: InterArrivalDistribution
    calendar: CalendarAugmentation
    ks_scores: dict[str, float] | None = None

    def to_dict(self) -> dict:
        return {"name": self.name, "family": self.distribution.family, "params": self.distribution.params,
                "calendar": self.calendar.to_dict(), "ks_scores": self.ks_scores}

    @classmethod
    def from_dict(cls, data: Mapping) -> "BaselineModel":
        return cls(data["name"], InterArrivalDistribution(data["family"], dict(data["params"])),
                   CalendarAugmentation.from_dict(data["calendar"]), data.get("ks_scores"))


def _train_interarrivals(train: ArrivalDataset) -> np.ndarray:
    gaps = interarrival_seconds(train.days)
    if gaps.size < 2:
        raise InsufficientDataError(f"need at least 2 within-day inter-arrivals, got {gaps.size}")
    return gaps


def fit_mean(train: ArrivalDataset) -> BaselineModel:
    """Every inter-arrival equals the training mean."""
    gaps = _train_interarrivals(train)
    mean = float(gaps.mean())
    if not mean > 0:
        raise InsufficientDataError("mean inter-arrival time is zero")
    return BaselineModel("mean", InterArrivalDistribution("fixed", {"value": mean}), fit_calendar(train))


def fit_best_distribution(train: ArrivalDataset) -> BaselineModel:
    gaps = _train_interarrivals(train)
    dist, scores = select_distribution(gaps)
    return BaselineModel("best_distribution", dist, fit_calendar(train), scores)


def _daily_window(cal: CalendarAugmentation, rng: np.random.Generator) -> tuple[int, int]:
    for _ in range(MAX_WINDOW_TRIES):
        first = int(cal.first_times[rng.integers(cal.first_times.size)])
        last = int(cal.last_times[rng.integers(cal.last_times.size)])
        if first < last:
            return first, last
    return int(cal.first_times.min()), int(cal.last_times.max())


def baseline_day(model: BaselineModel, date: dt.date, rng: np.random.Generator) -> np.ndarray:
    cal = model.calendar
    if rng.random() >= cal.working_probability.get(date.isoweekday(), 0.0) or cal.first_times.size == 0:
        return np.empty(0, dtype=np.int64)
    first, last = _daily_window(cal, rng)
    midnight = day_number_of_date(date) * US_PER_DAY
    mean_step = max(model.distribution.mean * US_PER_SECOND, 1.0)
    batch = int(min(max(16, 1.25 * (last - first) / mean_step + 8), 65_536))
    out = [np.array([first], dtype=np.int64)]
    cursor = first
    while True:
        steps = np.maximum(np.rint(model.distribution.sample(rng, batch) * US_PER_SECOND).astype(np.int64), 1)
        pos = cursor + np.cumsum(steps)
        inside = pos[pos <= last]
        out.append(inside)
        if inside.size < pos.size:
            break
        cursor = int(pos[-1])
    return midnight + np.concatenate(out)


def generate_baseline(model: BaselineModel, config: GenerationConfig) -> GeneratedArrivals:
    """Day loop of the calendar-augmented baseline; same horizon semantics as AT-KDE generation."""
    first_day = int(day_number(config.start))
    if config.n_days is not None:
        limit = config.n_days
    else:
        busy = np.mean(list(model.calendar.working_probability.values()))
        limit = 10 * max(1, config.n_cases) if busy <= 0 else 10 * max(1, math.ceil(config.n_cases / busy))
    days, total = [], 0
    for i in range(limit):
        if config.n_cases is not None and total >= config.n_cases:
            break
        date = date_of_day_number(first_day + i)
        stamps = baseline_day(model, date, day_rng(config.seed, i))
        if i == 0:
            stamps = stamps[stamps >= config.start]
        if config.n_cases is not None:
            stamps = stamps[:config.n_cases - total]
        total += stamps.size
        days.append(DayArrivals(date, stamps))
    if config.n_cases is not None and total < config.n_cases:
        raise GenerationError(f"only {total} of {config.n_cases} cases generated within {limit} days")
    return GeneratedArrivals(tuple(days))
