"""Command-line interface: ingest, fit, generate, evaluate and benchmark.

Every option can also come from a flat ``key = value`` config file passed
with ``--config``; flags given on the command line win over the file.
Exit codes: 0 success, 2 input error, 3 evaluation error, 4 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import baselines
from .divide import DEFAULT_SENSITIVITIES, DivideConfig
from .errors import (AtKdeError, ConfigurationError, EmptyInputError, EvaluationError, EventLogError,
                     InsufficientDataError, ModelFileError, SplitError)
from .evaluate import benchmark_run, cadd
from .eventlog import (US_PER_DAY, US_PER_SECOND, ArrivalDataset, SplitSpec, day_number, derive_arrivals,
                       format_instant, parse_event_log, parse_instant, read_arrivals_csv, render_arrivals_csv,
                       temporal_split)
from .generate import GenerationConfig
from .kde import DEFAULT_FACTOR_GRID, BandwidthSearchConfig
from .model import AtKdeConfig, ArrivalModel, fit_atkde

log = logging.getLogger("atkde")

EXIT_OK, EXIT_INPUT, EXIT_EVALUATION, EXIT_INTERNAL = 0, 2, 3, 4
INPUT_ERRORS = (ConfigurationError, EventLogError, EmptyInputError, SplitError, InsufficientDataError,
                ModelFileError, OSError)


class StageFailure(Exception):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


@contextmanager
def stage(name: str):
    try:
        yield
    except StageFailure:
        raise
    except Exception as exc:
        raise StageFailure(name, exc) from exc


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in str(text).replace(" ", "").split(",") if v)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _grid_text(values) -> str:
    return ",".join(f"{v:g}" for v in values)


def read_config_file(path: str | Path) -> dict[str, str]:
    """Parse ``key = value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    with Path(path).open(encoding="utf-8") as fh:
        for n, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}: line {n}: expected 'key = value'")
            key, value = (p.strip() for p in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def atomic_write(path: str | Path, text: str) -> None:
    """Write through a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _clean(obj):
    """JSON-safe copy: numpy scalars and arrays become Python values, non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def dump_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def load_dataset(args) -> ArrivalDataset:
    records = parse_event_log(args.input, args.case_column, args.timestamp_column)
    return derive_arrivals(records)


def atkde_config(args) -> AtKdeConfig:
    divide = DivideConfig(window=args.window, sensitivities=tuple(sorted(args.sensitivities)),
                          max_clusters=args.kmax, dbscan_eps=args.dbscan_eps)
    search = BandwidthSearchConfig(factor_grid=tuple(args.factor_grid), validation_fraction=args.validation_fraction,
                                   seeds_per_candidate=args.seeds_per_candidate)
    return AtKdeConfig(divide=divide, bandwidth=search, n_bins=args.bins, min_silhouette=args.min_silhouette,
                       tuning_seed=args.seed)


def generation_config(args, default_start: int | None, default_days: int | None) -> GenerationConfig:
    start = parse_instant(args.start) if args.start else default_start
    if start is None:
        raise ConfigurationError("no --start given and the model has no default start")
    if args.horizon_days is not None and args.num_cases is not None:
        raise ConfigurationError("give only one of --horizon-days and --num-cases")
    if args.num_cases is not None:
        return GenerationConfig(start, n_cases=args.num_cases, seed=args.seed)
    days = args.horizon_days if args.horizon_days is not None else default_days
    if days is None:
        raise ConfigurationError("no --horizon-days given and the model has no default horizon")
    return GenerationConfig(start, n_days=days, seed=args.seed)


def render_generated_csv(timestamps: np.ndarray) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["case_id", "timestamp"])
    for n, t in enumerate(timestamps, 1):
        writer.writerow([f"sim_{n}", format_instant(int(t))])
    return buf.getvalue()


def weekday_hour_matrix(timestamps: np.ndarray) -> np.ndarray:
    """7x24 counts, rows Monday..Sunday, columns hour of day."""
    ts = np.asarray(timestamps, dtype=np.int64)
    out = np.zeros((7, 24))
    if ts.size:
        weekday = (day_number(ts) + 3) % 7  # 1970-01-01 was a Thursday
        hour = (ts % US_PER_DAY) // (3600 * US_PER_SECOND)
        np.add.at(out, (weekday, hour), 1)
    return out


def render_matrix_csv(matrix: np.ndarray) -> str:
    names = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")
    lines = ["weekday," + ",".join(f"h{h:02d}" for h in range(24))]
    for name, row in zip(names, matrix):
        lines.append(name + "," + ",".join(f"{v:g}" for v in row))
    return "\n".join(lines) + "\n"


def cmd_ingest(args) -> int:
    with stage("ingest"):
        dataset = load_dataset(args)
    with stage("write"):
        atomic_write(args.output, render_arrivals_csv(dataset))
    print(f"{dataset.n_arrivals} arrivals over {dataset.n_days} days -> {args.output}")
    return EXIT_OK


def cmd_fit(args) -> int:
    with stage("ingest"):
        dataset = load_dataset(args)
    with stage("split"):
        train, test = temporal_split(dataset, SplitSpec(args.train_fraction))
    with stage("fit"):
        model = fit_atkde(train, atkde_config(args), test=test)
    with stage("write"):
        payload = model.to_dict()
        diagnostics = payload.pop("diagnostics")
        atomic_write(args.output, dump_json(payload))
        diag_path = args.diagnostics or str(Path(args.output).with_suffix(".diagnostics.json"))
        atomic_write(diag_path, dump_json(diagnostics))
        if args.train_out:
            atomic_write(args.train_out, render_arrivals_csv(train))
        if args.test_out:
            atomic_write(args.test_out, render_arrivals_csv(test))
    print(f"fitted on {train.n_arrivals} arrivals: {len(model.labels)} segment(s), labels {list(model.labels)}, "
          f"bandwidth factor {model.ensemble.factor:g} -> {args.output}")
    return EXIT_OK


def load_model(path: str | Path) -> ArrivalModel:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}: not valid JSON ({exc})") from exc
    return ArrivalModel.from_dict(data)


def cmd_generate(args) -> int:
    with stage("load"):
        model = load_model(args.model)
        config = generation_config(args, model.default_start, model.default_days)
    with stage("generate"):
        ts = model.generate(config).timestamps()
    with stage("write"):
        atomic_write(args.output, render_generated_csv(ts))
    horizon = f"{config.n_days} days" if config.n_days is not None else f"{config.n_cases} cases"
    print(f"{ts.size} arrivals from {format_instant(config.start)} over {horizon} -> {args.output}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    with stage("load"):
        test = read_arrivals_csv(args.test).timestamps()
        sim = read_arrivals_csv(args.sim).timestamps()
    with stage("evaluate"):
        report = cadd(test, sim)
    print(f"cadd {report.cadd:.6f}")
    print(f"sqrt_cadd {report.sqrt_cadd:.6f}")
    if args.output:
        with stage("write"):
            atomic_write(args.output, dump_json(report.to_dict()))
    return EXIT_OK


def cmd_benchmark(args) -> int:
    with stage("ingest"):
        dataset = load_dataset(args)
    with stage("split"):
        train, test = temporal_split(dataset, SplitSpec(args.train_fraction))
    config = atkde_config(args)
    start = int(train.timestamps()[-1]) + 1
    last_day = int(day_number(int(test.timestamps()[-1])))
    with stage("configure"):
        gen_args = argparse.Namespace(**{**vars(args), "seed": 0})
        template = generation_config(gen_args, start, last_day - int(day_number(start)) + 1)

    def horizon(seed: int) -> GenerationConfig:
        return GenerationConfig(template.start, template.n_days, template.n_cases, seed)

    def atkde_factory(data):
        model = fit_atkde(data, config, test=test)
        return lambda seed: model.generate(horizon(seed)).timestamps()

    def baseline_factory(fitter):
        def factory(data):
            model = fitter(data)
            return lambda seed: baselines.generate_baseline(model, horizon(seed)).timestamps()
        return factory

    factories = {"AT-KDE": atkde_factory, "Mean": baseline_factory(baselines.fit_mean),
                 "Best Distribution": baseline_factory(baselines.fit_best_distribution)}
    matrices = {name: np.zeros((7, 24)) for name in factories}

    def on_run(name, seed, sim):
        matrices[name] += weekday_hour_matrix(sim) / args.runs

    with stage("benchmark"):
        rows = benchmark_run(train, test, factories, runs=args.runs, base_seed=args.seed, on_run=on_run)

    out = Path(args.out_dir)
    with stage("write"):
        lines = ["model,mean_sqrt_cadd,std_sqrt_cadd,fit_seconds,gen_seconds"]
        for r in rows:
            lines.append(f"{r.model},{r.mean:.6f},{r.std:.6f},{r.fit_seconds:.4f},{r.gen_seconds:.4f}")
        atomic_write(out / "benchmark.csv", "\n".join(lines) + "\n")
        detail = {
            "runs": args.runs,
            "base_seed": args.seed,
            "train_arrivals": train.n_arrivals,
            "test_arrivals": test.n_arrivals,
            "start": format_instant(template.start),
            "horizon_days": template.n_days,
            "horizon_cases": template.n_cases,
            "models": {r.model: {"scores": r.scores, "mean_sqrt_cadd": r.mean, "std_sqrt_cadd": r.std,
                                 "fit_seconds": r.fit_seconds, "gen_seconds": r.gen_seconds, "error": r.error}
                       for r in rows},
        }
        atomic_write(out / "benchmark.json", dump_json(detail))
        atomic_write(out / "hours_test.csv", render_matrix_csv(weekday_hour_matrix(test.timestamps())))
        for name, matrix in matrices.items():
            slug = name.lower().replace(" ", "_").replace("-", "")
            atomic_write(out / f"hours_{slug}.csv", render_matrix_csv(matrix))

    for r in rows:
        status = f"{r.mean:.3f} +- {r.std:.3f}" if r.error is None else f"failed ({r.error})"
        print(f"{r.model:<18} sqrt(CADD) {status}")
    return EXIT_OK


def build_parser(defaults: dict[str, str] | None = None) -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="atkde", description="Case-arrival modelling with temporal KDE ensembles.",
                                     formatter_class=fmt)
    parser.add_argument("--config", help="flat 'key = value' file with option defaults")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    columns = argparse.ArgumentParser(add_help=False)
    columns.add_argument("input", help="event log CSV")
    columns.add_argument("--case-column", default="case_id", help="case identifier column")
    columns.add_argument("--timestamp-column", default="timestamp", help="event timestamp column")

    modelling = argparse.ArgumentParser(add_help=False)
    modelling.add_argument("--window", type=int, default=7, help="moving-average window in days")
    modelling.add_argument("--sensitivities", type=_floats, default=_grid_text(DEFAULT_SENSITIVITIES),
                           help="change-point sensitivity grid in (0, 1]")
    modelling.add_argument("--kmax", type=int, default=6, help="maximum number of global clusters")
    modelling.add_argument("--dbscan-eps", type=float, default=1.5, help="DBSCAN radius on standardized features")
    modelling.add_argument("--bins", type=int, default=3, help="intraday bins per day")
    modelling.add_argument("--min-silhouette", type=float, default=0.25,
                           help="weekday clusters below this silhouette collapse to one")
    modelling.add_argument("--factor-grid", type=_floats, default=_grid_text(DEFAULT_FACTOR_GRID),
                           help="bandwidth factors to search; a single value skips the search")
    modelling.add_argument("--validation-fraction", type=float, default=0.2,
                           help="share of training cases held out to score bandwidth factors")
    modelling.add_argument("--seeds-per-candidate", type=int, default=3, help="generation runs per factor")
    modelling.add_argument("--train-fraction", type=float, default=0.8, help="share of cases used for training")

    horizon = argparse.ArgumentParser(add_help=False)
    horizon.add_argument("--start", default=None, help="ISO-8601 start instant (default: right after training)")
    horizon.add_argument("--horizon-days", type=int, default=None, help="number of days to simulate")
    horizon.add_argument("--num-cases", type=int, default=None, help="number of cases to simulate")

    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", type=int, default=0, help="random seed")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[columns], formatter_class=fmt, help="event log -> arrival CSV")
    p.add_argument("-o", "--output", default="arrivals.csv", help="arrival CSV to write")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("fit", parents=[columns, modelling, seeded], formatter_class=fmt,
                       help="fit a model on the training split")
    p.add_argument("-o", "--output", default="model.json", help="model JSON to write")
    p.add_argument("--diagnostics", default=None, help="diagnostics JSON; None writes <model>.diagnostics.json")
    p.add_argument("--train-out", default=None, help="also write the training arrivals CSV")
    p.add_argument("--test-out", default=None, help="also write the held-out arrivals CSV")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("generate", parents=[horizon, seeded], formatter_class=fmt, help="simulate arrivals")
    p.add_argument("model", help="model JSON written by 'fit'")
    p.add_argument("-o", "--output", default="generated.csv", help="arrival CSV to write")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", formatter_class=fmt, help="CADD between two arrival files")
    p.add_argument("test", help="reference arrivals CSV (needs a timestamp column)")
    p.add_argument("sim", help="simulated arrivals CSV")
    p.add_argument("-o", "--output", default=None, help="report JSON")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("benchmark", parents=[columns, modelling, horizon, seeded], formatter_class=fmt,
                       help="AT-KDE against the Mean and Best Distribution baselines")
    p.add_argument("--runs", type=int, default=10, help="generation runs per model")
    p.add_argument("--out-dir", default="benchmark", help="directory for result tables")
    p.set_defaults(func=cmd_benchmark)

    if defaults:
        known = {a.dest for sp in sub.choices.values() for a in sp._actions}
        unknown = sorted(set(defaults) - known)
        if unknown:
            raise ConfigurationError(f"unknown config key(s): {', '.join(unknown)}")
        for sp in sub.choices.values():
            sp.set_defaults(**{k: v for k, v in defaults.items()
                               if any(a.dest == k for a in sp._actions)})
    return parser


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, EvaluationError):
        return EXIT_EVALUATION
    if isinstance(exc, INPUT_ERRORS):
        return EXIT_INPUT
    return EXIT_INTERNAL


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    try:
        defaults = read_config_file(known.config) if known.config else None
        parser = build_parser(defaults)
    except (ConfigurationError, OSError) as exc:
        print(f"atkde: config: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors exit with 2 already
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StageFailure as exc:
        print(f"atkde {args.command}: {exc.stage}: {exc.cause}", file=sys.stderr)
        code = _exit_code(exc.cause)
        if code == EXIT_INTERNAL and not isinstance(exc.cause, AtKdeError):
            log.debug("internal error", exc_info=exc.cause)
        return code


if __name__ == "__main__":
    sys.exit(main())
