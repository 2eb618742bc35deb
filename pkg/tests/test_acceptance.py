"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (shown in the terminal summary) before
asserting, so a failing criterion still reports its measured values.
"""

import statistics
import time

import numpy as np
import pytest
from scipy import stats
from scipy.special import ndtr

from atkde import baselines
from atkde.cli import main
from atkde.divide import DivideConfig, cluster_global_segments
from atkde.evaluate import benchmark_run, emd_1d
from atkde.eventlog import clock_us, date_of_day_number, day_number, temporal_split
from atkde.generate import GenerationConfig
from atkde.kde import FLOOR_BANDWIDTH, KdeModel
from atkde.model import AtKdeConfig, fit_atkde, fit_structure
from atkde.partition import NODATA
from atkde.synthetic import (alternating_log, constant_log, loan_drift_log, simulate, stationary_log, step_log,
                             uniform_hours, write_event_log)

from conftest import ACCEPTANCE_LINES
from test_evaluate import lp_emd

RUNS = 10
SEEDS = range(10)


def report(n: int, ok: bool, detail: str, seconds: float | None = None) -> None:
    timing = f" [{seconds:.1f}s]" if seconds is not None else ""
    ACCEPTANCE_LINES.append(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}{timing}")


class Outputs:
    """AT-KDE models and their generated arrivals, shared with the bounds check."""

    def __init__(self):
        self.items = []  # (model, start, n_days, timestamps)

    def add(self, model, start, n_days, ts):
        self.items.append((model, start, n_days, np.asarray(ts)))


@pytest.fixture(scope="module")
def outputs():
    return Outputs()


def run_benchmark(make_log, outputs):
    """Paired per-seed means of sqrt(CADD) for the three models under one shared horizon."""
    means = {"AT-KDE": [], "Mean": [], "Best Distribution": []}
    models = []
    for seed in SEEDS:
        train, test = temporal_split(make_log(seed))
        start = int(train.timestamps()[-1]) + 1
        n_days = int(day_number(int(test.timestamps()[-1])) - day_number(start)) + 1
        fitted = {}

        def horizon(s):
            return GenerationConfig(start, n_days=n_days, seed=s)

        def atkde(data):
            fitted["model"] = fit_atkde(data, test=test)
            return lambda s: fitted["model"].generate(horizon(s)).timestamps()

        def baseline(fitter):
            def factory(data):
                model = fitter(data)
                return lambda s: baselines.generate_baseline(model, horizon(s)).timestamps()
            return factory

        def keep(name, s, sim):
            if name == "AT-KDE":
                outputs.add(fitted["model"], start, n_days, sim)

        rows = benchmark_run(train, test, {"AT-KDE": atkde, "Mean": baseline(baselines.fit_mean),
                                           "Best Distribution": baseline(baselines.fit_best_distribution)},
                             runs=RUNS, on_run=keep)
        for row in rows:
            assert row.error is None, row.error
            means[row.model].append(row.mean)
        models.append(fitted["model"])
    return {k: np.array(v) for k, v in means.items()}, models


@pytest.fixture(scope="module")
def loan_benchmark(outputs):
    t0 = time.perf_counter()
    means, models = run_benchmark(loan_drift_log, outputs)
    return means, models, time.perf_counter() - t0


@pytest.fixture(scope="module")
def stationary_benchmark(outputs):
    t0 = time.perf_counter()
    means, models = run_benchmark(stationary_log, outputs)
    return means, models, time.perf_counter() - t0


@pytest.fixture(scope="module")
def alternating_run(outputs):
    t0 = time.perf_counter()
    model = fit_atkde(alternating_log(0))
    start = model.default_start
    sim = model.generate(GenerationConfig(start, n_days=60, seed=0))
    outputs.add(model, start, 60, sim.timestamps())
    return model, start, sim, time.perf_counter() - t0


def test_criterion_1_partition_completeness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    failures = 0
    for i in range(50):
        n_days = int(rng.integers(20, 90))
        levels = rng.uniform(0, 40, size=rng.integers(1, 4))
        rates = np.repeat(levels, -(-n_days // levels.size))[:n_days]
        factors = rng.choice([0.0, 0.3, 1.0, 2.0], size=7)
        factors[rng.integers(7)] = 1.0  # at least one working weekday
        lo = rng.uniform(0, 12)
        hi = lo + rng.uniform(0.5, 12)
        ds = simulate(rates, seed=i, weekday_factors=factors, intraday=uniform_hours(lo, hi))
        if ds.n_arrivals == 0:
            continue
        config = AtKdeConfig(divide=DivideConfig(window=int(rng.integers(2, 8))), n_bins=int(rng.integers(1, 6)))
        part = fit_structure(ds, config).partition
        pooled = np.sort(np.concatenate([c.arrivals() for c in part.cells.values()]))
        failures += not np.array_equal(pooled, np.sort(ds.timestamps()))
    seconds = time.perf_counter() - t0
    ok = failures == 0 and seconds < 10
    report(1, ok, f"{50 - failures}/50 datasets reunite exactly", seconds)
    assert ok


def test_criterion_2_change_points():
    t0 = time.perf_counter()
    hits = 0
    for seed in range(100):
        g = cluster_global_segments(step_log(seed))
        hits += len(g.change_points) == 1 and abs(g.change_points[0] - 60) <= 7
    fallbacks = sum(cluster_global_segments(constant_log(seed)).fallback for seed in range(100))
    seconds = time.perf_counter() - t0
    ok = hits >= 95 and fallbacks == 100 and seconds < 30
    report(2, ok, f"step log {hits}/100 single change point near day 61, constant log {fallbacks}/100 fallback",
           seconds)
    assert ok


def test_criterion_3_recurring_pattern(alternating_run):
    model, start, sim, seconds = alternating_run
    labels = model.schedule(start).labels(60)
    counts = np.array([len(d) for d in sim.days])
    by_label = {int(j): counts[labels == j].mean() for j in np.unique(labels)}
    ratio = max(by_label.values()) / max(min(by_label.values()), 1e-9) if len(by_label) == 2 else 0.0
    ok = model.labels == (1, 2, 1, 2) and ratio >= 3 and seconds < 30
    report(3, ok, f"labels {list(model.labels)}, scheduled block mean ratio {ratio:.2f}", seconds)
    assert ok


def kde_cdf(model: KdeModel, x: np.ndarray) -> np.ndarray:
    """CDF of the KDE restricted to [0, inf), the law its sampler draws from."""
    def raw(v):
        out = np.empty(v.size)
        for i in range(0, v.size, 2000):
            out[i:i + 2000] = ndtr((v[i:i + 2000, None] - model.samples[None, :]) / model.bandwidth).mean(axis=1)
        return out
    below = raw(np.zeros(1))[0]
    return np.clip((raw(np.asarray(x, float)) - below) / (1 - below), 0, 1)


def test_criterion_4_kde(alternating_run, loan_benchmark):
    t0 = time.perf_counter()
    fits = [alternating_run[0], loan_benchmark[1][0]]
    cells = [(m, fit.ensemble.factor) for fit in fits for m in fit.ensemble.models.values()]
    worst_mass, worst_h = 0.0, 0.0
    for model, factor in cells:
        h = model.bandwidth
        grid = np.linspace(model.samples.min() - 10 * h, model.samples.max() + 10 * h,
                           int(min(200_000, max(2_000, (np.ptp(model.samples) + 20 * h) / (h / 8)))))
        dens = np.concatenate([model.density(grid[i:i + 20_000]) for i in range(0, grid.size, 20_000)])
        worst_mass = max(worst_mass, abs(np.trapezoid(dens, grid) - 1))
        x = model.samples
        closed = FLOOR_BANDWIDTH
        if model.n >= 2 and x.min() < x.max():
            iqr, sigma = stats.iqr(x), statistics.stdev(x)
            closed = 0.9 * (min(sigma, iqr / 1.34) if iqr > 0 else sigma) * model.n ** -0.2
        worst_h = max(worst_h, abs(h - factor * closed))
    spread = [m for m, _ in cells if m.n >= 100 and np.unique(m.samples).size >= 50][:4]
    worst_ks = 0.0
    for i, model in enumerate(spread):
        draws = model.sample(np.random.default_rng(i), 100_000)
        worst_ks = max(worst_ks, stats.kstest(draws, lambda v: kde_cdf(model, v)).statistic)
    seconds = time.perf_counter() - t0
    ok = worst_mass <= 1e-3 and worst_h <= 1e-6 and worst_ks <= 0.02 and len(spread) > 0 and seconds < 20
    report(4, ok, f"{len(cells)} cells: max |mass-1| {worst_mass:.1e}, max bandwidth error {worst_h:.1e}, "
                  f"max KS {worst_ks:.4f} over {len(spread)} well-spread cells", seconds)
    assert ok


def test_criterion_5_emd_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)

    def instance():
        keys = rng.choice(40, size=rng.integers(1, 7), replace=False)
        return {int(k): float(rng.integers(1, 20)) for k in keys}

    hists = [instance() for _ in range(201)]
    worst, axioms = 0.0, True
    for a, b, c in zip(hists, hists[1:], hists[2:] + hists[:1]):
        d = emd_1d(a, b)
        worst = max(worst, abs(d - lp_emd(a, b)))
        axioms &= d >= 0 and emd_1d(a, a) == 0 and abs(d - emd_1d(b, a)) <= 1e-12
        axioms &= d <= emd_1d(a, c) + emd_1d(c, b) + 1e-12
    seconds = time.perf_counter() - t0
    ok = worst <= 1e-9 and axioms and seconds < 5
    report(5, ok, f"200 instances, max |EMD - LP| {worst:.1e}, axioms {'hold' if axioms else 'violated'}", seconds)
    assert ok


def test_criterion_6_loan_drift_ranking(loan_benchmark):
    means, _, seconds = loan_benchmark
    at, mean, best = means["AT-KDE"], means["Mean"], means["Best Distribution"]
    wins_mean, wins_best = int((at < mean).sum()), int((at < best).sum())
    ok = wins_mean >= 9 and wins_best >= 9 and seconds < 180
    report(6, ok, f"AT-KDE beats Mean {wins_mean}/10 and Best Distribution {wins_best}/10 "
                  f"(mean sqrt CADD {at.mean():.2f} / {mean.mean():.2f} / {best.mean():.2f})", seconds)
    assert ok


def test_criterion_7_stationary_parity(stationary_benchmark):
    means, _, seconds = stationary_benchmark
    at, best = means["AT-KDE"].mean(), means["Best Distribution"].mean()
    rel = abs(at - best) / best
    ok = rel <= 0.25 and seconds < 120
    report(7, ok, f"AT-KDE {at:.3f} vs Best Distribution {best:.3f} ({100 * rel:.1f}% apart)", seconds)
    assert ok


def test_criterion_8_runtime():
    ds = simulate(np.full(200, 130.0), seed=8, weekday_factors=(1.2, 1.1, 1.0, 1.0, 0.9, 0.4, 0.3))
    ds = ds.__class__.from_timestamps(ds.timestamps()[:20_000])
    t0 = time.perf_counter()
    model = fit_atkde(ds)
    fit_seconds = time.perf_counter() - t0
    t0 = time.perf_counter()
    sim = model.generate(GenerationConfig(model.default_start, n_days=model.default_days, seed=0))
    gen_seconds = time.perf_counter() - t0
    ok = ds.n_arrivals == 20_000 and fit_seconds <= 60 and gen_seconds <= 1
    report(8, ok, f"{ds.n_arrivals} arrivals: fit {fit_seconds:.2f}s, generate {gen_seconds:.3f}s "
                  f"({sim.n_arrivals} arrivals over {model.default_days} days)")
    assert ok


def test_criterion_9_determinism(tmp_path, capsys):
    log = tmp_path / "log.csv"
    write_event_log(loan_drift_log(3), log, events_per_case=2)
    outputs = []
    for run in ("a", "b"):
        d = tmp_path / run
        codes = [
            main(["fit", str(log), "-o", str(d / "model.json"), "--test-out", str(d / "test.csv")]),
            main(["generate", str(d / "model.json"), "-o", str(d / "sim.csv"), "--seed", "11"]),
            main(["evaluate", str(d / "test.csv"), str(d / "sim.csv"), "-o", str(d / "report.json")]),
        ]
        stdout = capsys.readouterr().out.replace(str(d), "<dir>")
        files = {p.name: p.read_bytes() for p in sorted(d.iterdir())}
        outputs.append((codes, stdout, files))
    (codes_a, out_a, files_a), (codes_b, out_b, files_b) = outputs
    same = codes_a == codes_b == [0, 0, 0] and out_a == out_b and files_a == files_b
    report(9, same, f"{len(files_a)} output files and stdout byte-identical across two runs: {same}")
    assert same


def test_criterion_10_bounds_and_nodata(outputs, alternating_run, loan_benchmark, stationary_benchmark):
    checked = outside = on_nodata = 0
    for model, start, n_days, ts in outputs.items:
        labels = model.schedule(start).labels(n_days)
        clocks = clock_us(ts)
        outside += int(((clocks < model.grid.lower) | (clocks > model.grid.upper)).sum())
        offsets = day_number(ts) - day_number(start)
        for off, count in zip(*np.unique(offsets, return_counts=True)):
            weekday = date_of_day_number(int(day_number(start) + off)).isoweekday()
            if model.weekdays.label(int(labels[off]), weekday) == NODATA:
                on_nodata += int(count)
        checked += ts.size
    ok = checked > 0 and outside == 0 and on_nodata == 0
    report(10, ok, f"{checked} generated arrivals: {outside} outside bounds, {on_nodata} on NoData weekdays")
    assert ok
