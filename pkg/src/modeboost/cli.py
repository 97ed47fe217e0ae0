"""Command-line interface.

Subcommands: synth, ingest snapshots|trips, featurize, train, predict,
evaluate, tune, bench, pipeline.  Exit codes: 0 success, 1 domain error,
2 usage error.  Heavy modules are imported inside handlers so that --help
stays fast and --jobs can cap math-library threads before they load.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from datetime import date, datetime
from pathlib import Path


def _add_synth(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("synth", help="generate a reproducible synthetic demand panel")
    p.add_argument("--entities", type=int, default=5)
    p.add_argument("--days", type=int, default=28)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--amplitude", type=float, default=12.0, help="daily peak rate scale")
    p.add_argument("--weekly-factor", type=float, default=0.5)
    p.add_argument("--noise", type=float, default=1.0, help="0 = deterministic, 1 = Poisson")
    p.add_argument("--holidays", default="", help="comma-separated ISO dates that dip demand")
    p.add_argument("--holiday-dip", type=float, default=0.45)
    p.add_argument("--start", default="2021-12-06T00:00")
    p.add_argument("--out", required=True, help="demand CSV to write")
    p.add_argument("--holidays-out", default=None, help="also write the holiday list here")


def _add_ingest(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("ingest", help="convert raw files into the demand CSV format")
    kinds = p.add_subparsers(dest="kind", required=True)
    ps = kinds.add_parser("snapshots", help="vehicle snapshot CSV + region polygons")
    ps.add_argument("--input", required=True)
    ps.add_argument("--regions", required=True, help="GeoJSON FeatureCollection of polygons")
    ps.add_argument("--out", required=True)
    ps.add_argument("--report", default=None, help="write rule,count CSV here")
    pt = kinds.add_parser("trips", help="trip archive CSV (station demand = trip starts)")
    pt.add_argument("--input", required=True)
    pt.add_argument("--out", required=True)
    pt.add_argument("--report", default=None)
    pt.add_argument("--min-round-trip-seconds", type=float, default=120.0)


def _add_featurize(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("featurize", help="build the feature matrix from a demand CSV")
    p.add_argument("--demand", required=True)
    p.add_argument("--out", required=True, help="binary matrix file (.mbfm)")
    p.add_argument("--csv-out", default=None, help="optional CSV export of the matrix")
    p.add_argument("--config", default=None, help="TOML with [features]/[labeling] sections")
    p.add_argument("--holidays", default=None)
    p.add_argument("--horizons", default="5,15,30,60")


def _add_train(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("train", help="train one model for one horizon")
    p.add_argument("--matrix", required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--task", choices=("regression", "classification"), default="regression")
    p.add_argument("--out", required=True, help=".mbgb binary or .json export")
    p.add_argument("--config", default=None, help="TOML with a [train] section")
    p.add_argument("--seed", type=int, default=0)


def _add_predict(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("predict", help="predict matrix rows with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--matrix", required=True)
    p.add_argument("--rows", choices=("test", "all"), default="test")
    p.add_argument("--out", required=True)


def _add_evaluate(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("evaluate", help="score models and baselines on the test span")
    p.add_argument("--demand", required=True)
    p.add_argument("--matrix", required=True)
    p.add_argument("--models", default="", help="comma-separated model files")
    p.add_argument("--baselines", default="ha,snaive,ses,croston")
    p.add_argument("--task", choices=("regression", "classification"), default="regression")
    p.add_argument("--out", required=True)
    p.add_argument("--significance-out", default=None)
    p.add_argument("--plot-data", default=None, help="write entity-by-day totals here")
    p.add_argument("--ses-alpha", type=float, default=None)
    p.add_argument("--croston-alpha", type=float, default=0.1)


def _add_tune(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("tune", help="two-phase TPE search over training parameters")
    p.add_argument("--matrix", required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--task", choices=("regression", "classification"), default="regression")
    p.add_argument("--budget", default="30,30", help="phase sizes n1,n2")
    p.add_argument("--narrow", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="study log CSV")


def _add_bench(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("bench", help="inference latency and memory footprint")
    p.add_argument("--model", required=True, action="append", dest="models")
    p.add_argument("--rows", required=True, help="matrix file supplying input rows")
    p.add_argument("--batch", type=int, default=3500)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--warmup", type=int, default=3)
    p.add_argument("--per-record-samples", type=int, default=500)
    p.add_argument("--out", default=None)


def _add_pipeline(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("pipeline", help="full run from a demand CSV to models and reports")
    p.add_argument("--config", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modeboost",
        description="shared micro-mobility demand forecasting toolkit",
    )
    parser.add_argument("--jobs", type=int, default=None, help="cap math-library threads")
    sub = parser.add_subparsers(dest="command", required=True)
    for add in (
        _add_synth,
        _add_ingest,
        _add_featurize,
        _add_train,
        _add_predict,
        _add_evaluate,
        _add_tune,
        _add_bench,
        _add_pipeline,
    ):
        add(sub)
    return parser


def _apply_jobs(jobs: int | None) -> None:
    if jobs is None:
        env = os.environ.get("MODEBOOST_JOBS")
        jobs = int(env) if env else None
    if jobs is not None and jobs > 0:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, str(jobs))


# ---------------------------------------------------------------------------
# handlers
# ---------------------------------------------------------------------------

def _cmd_synth(args) -> int:
    from .ingest import SynthSpec, generate_synthetic, write_demand_csv

    holidays = tuple(date.fromisoformat(d) for d in args.holidays.split(",") if d)
    spec = SynthSpec(
        entities=args.entities,
        days=args.days,
        amplitudes=args.amplitude,
        weekly_factor=args.weekly_factor,
        noise=args.noise,
        holiday_dates=holidays,
        holiday_dip=args.holiday_dip,
        seed=args.seed,
        start=datetime.fromisoformat(args.start),
    )
    panel = generate_synthetic(spec)
    write_demand_csv(panel, args.out)
    if args.holidays_out:
        Path(args.holidays_out).write_text(
            "".join(f"{d.isoformat()}\n" for d in holidays), encoding="utf-8"
        )
    print(f"wrote {panel.n_entities} entities x {panel.grid.length} minutes to {args.out}")
    return 0


def _write_report_csv(report: dict, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rule", "count"])
        for rule, count in report.items():
            writer.writerow([rule, count])


def _cmd_ingest(args) -> int:
    from .geo import RegionSet
    from .ingest import (
        CleaningRules,
        clean_trips,
        parse_snapshots,
        parse_trips,
        snapshots_to_panel,
        trips_to_panel,
        write_demand_csv,
    )

    if args.kind == "snapshots":
        records, parse_report = parse_snapshots(args.input)
        regions = RegionSet.from_geojson(args.regions)
        panel, assign_report = snapshots_to_panel(records, regions)
        report = {**parse_report, **assign_report}
    else:
        rows = parse_trips(args.input)
        trips, report = clean_trips(
            rows, CleaningRules(min_round_trip_seconds=args.min_round_trip_seconds)
        )
        report["kept"] = len(trips)
        panel = trips_to_panel(trips)
    write_demand_csv(panel, args.out)
    if args.report:
        _write_report_csv(report, args.report)
    print(f"wrote {panel.n_entities} entities x {panel.grid.length} minutes to {args.out}")
    return 0


def _cmd_featurize(args) -> int:
    from .config import config_hash, feature_config_from, label_config_from, load_run_config
    from .core import chronological_split
    from .features import FeatureConfig, assemble_matrix
    from .ingest import load_holidays, read_demand_csv
    from .labeling import LabelConfig
    from .matrixio import save_matrix, write_matrix_csv

    if args.config:
        run = load_run_config(args.config)
        fconfig, lconfig = run.features, run.labeling
    else:
        fconfig, lconfig = FeatureConfig(), LabelConfig()
    panel = read_demand_csv(args.demand)
    holidays = load_holidays(args.holidays) if args.holidays else None
    horizons = tuple(int(h) for h in args.horizons.split(","))
    matrix = assemble_matrix(panel, fconfig, horizons, lconfig, chronological_split(panel), holidays)
    matrix.config_hash = config_hash(
        {"features": repr(fconfig), "labeling": repr(lconfig), "horizons": horizons}
    )
    save_matrix(matrix, args.out)
    if args.csv_out:
        write_matrix_csv(matrix, args.csv_out)
    print(
        f"wrote {matrix.n_rows} rows x {len(matrix.feature_names)} features "
        f"(horizons {','.join(map(str, horizons))}) to {args.out}"
    )
    return 0


def _cmd_train(args) -> int:
    from . import gbtree
    from .config import train_params_from
    from .matrixio import load_matrix
    from .postprocess import fit_scaler
    from .rng import derive_seed

    matrix = load_matrix(args.matrix)
    if args.horizon not in matrix.horizons:
        raise SystemExit(f"error: horizon {args.horizon} not in matrix horizons {matrix.horizons}")
    params_section = {}
    if args.config:
        import sys as _sys

        if _sys.version_info >= (3, 11):
            import tomllib as _toml
        else:
            import tomli as _toml
        with open(args.config, "rb") as fh:
            params_section = dict(_toml.load(fh).get("train", {}))
        params_section.pop("task", None)
        params_section.pop("num_classes", None)
    params = train_params_from(params_section).updated(
        task=args.task,
        num_classes=3 if args.task == "classification" else 1,
        seed=derive_seed(args.seed, f"train:{args.task}:{args.horizon}"),
    )
    scaler = fit_scaler(matrix)
    train = matrix.rows_train()
    valid = matrix.rows_valid(args.horizon)
    y = matrix.y_cls[args.horizon] if args.task == "classification" else matrix.y_reg[args.horizon]
    ensemble = gbtree.fit(
        matrix.X[train],
        y[train],
        params,
        matrix.feature_names,
        scaler=scaler,
        eval_set=(matrix.X[valid], y[valid]),
        horizon=args.horizon,
        label_tolerance=matrix.label_tolerance,
        peaks={n: float(p) for n, p in zip(matrix.entity_names, matrix.peaks)},
        config_hash=matrix.config_hash,
    )
    gbtree.save(ensemble, args.out)
    print(
        f"trained {args.task} h={args.horizon}: {ensemble.num_rounds} rounds, "
        f"{sum(t.n_nodes for t in ensemble.trees)} nodes -> {args.out}"
    )
    return 0


def _cmd_predict(args) -> int:
    from . import gbtree
    from .matrixio import load_matrix

    ensemble = gbtree.load(args.model)
    matrix = load_matrix(args.matrix)
    if tuple(matrix.feature_names) != ensemble.feature_names:
        raise SystemExit("error: model and matrix feature names do not match")
    mask = matrix.rows_test() if args.rows == "test" else slice(None)
    preds = ensemble.predict(matrix.X[mask])
    steps = matrix.steps[mask]
    codes = matrix.entity_codes[mask] if args.rows == "test" else matrix.entity_codes
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["entity", "step", "horizon", "prediction"])
        for code, step, pred in zip(codes, steps, preds):
            writer.writerow(
                [matrix.entity_names[int(code)], int(step), ensemble.horizon, repr(float(pred))]
            )
    print(f"wrote {len(preds)} predictions to {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    from . import gbtree
    from .evaluate import daily_totals_csv, run_evaluation
    from .ingest import read_demand_csv
    from .matrixio import load_matrix

    panel = read_demand_csv(args.demand)
    matrix = load_matrix(args.matrix)
    ensembles: dict[str, dict[int, object]] = {}
    for model_path in filter(None, args.models.split(",")):
        ensemble = gbtree.load(model_path)
        if tuple(matrix.feature_names) != ensemble.feature_names:
            raise SystemExit(f"error: {model_path} does not match the matrix features")
        name = f"gbt_{ensemble.task}"
        ensembles.setdefault(name, {})[ensemble.horizon] = ensemble
    horizons = None
    if ensembles:
        shared = set.intersection(*(set(h.keys()) for h in ensembles.values()))
        horizons = tuple(sorted(shared))
    baselines = tuple(filter(None, args.baselines.split(",")))
    report = run_evaluation(
        panel,
        matrix,
        ensembles,
        baselines=baselines,
        horizons=horizons,
        task=args.task,
        ses_alpha=args.ses_alpha,
        croston_alpha=args.croston_alpha,
    )
    report.write_csv(args.out)
    if args.significance_out:
        report.write_significance_csv(args.significance_out)
    if args.plot_data:
        daily_totals_csv(panel, args.plot_data)
    print(f"wrote {len(report.rows)} metric rows to {args.out}")
    return 0


def _cmd_tune(args) -> int:
    from .matrixio import load_matrix
    from .tune import params_toml, tune_forecaster

    matrix = load_matrix(args.matrix)
    n1, n2 = (int(v) for v in args.budget.split(","))
    result = tune_forecaster(
        matrix,
        args.task,
        args.horizon,
        budget=(n1, n2),
        narrow=args.narrow,
        seed=args.seed,
    )
    if args.out:
        result.study.write_csv(args.out)
    print(f"# best objective: {result.best_value!r}")
    print(params_toml(result.best_params), end="")
    return 0


def _cmd_bench(args) -> int:
    from . import gbtree
    from .bench import bench_suite, write_bench_csv
    from .matrixio import load_matrix

    matrix = load_matrix(args.rows)
    models = [gbtree.load(p) for p in args.models]
    reports = bench_suite(
        models,
        matrix.X,
        batch_size=args.batch,
        warmup=args.warmup,
        repeats=args.repeats,
        per_record_samples=args.per_record_samples,
    )
    for r in reports:
        print(
            f"{r.label}: batch {r.batch_size} in {r.batch_total_ms:.2f} ms | "
            f"per-record mean {r.per_record_mean_ms:.4f} ms "
            f"(p50 {r.p50_ms:.4f} / p95 {r.p95_ms:.4f} / p99 {r.p99_ms:.4f}) | "
            f"{r.model_bytes} bytes"
        )
    if args.out:
        write_bench_csv(reports, args.out)
    return 0


def _cmd_pipeline(args) -> int:
    from .config import load_run_config
    from .pipeline import run_pipeline

    run_pipeline(load_run_config(args.config))
    return 0


_HANDLERS = {
    "synth": _cmd_synth,
    "ingest": _cmd_ingest,
    "featurize": _cmd_featurize,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "evaluate": _cmd_evaluate,
    "tune": _cmd_tune,
    "bench": _cmd_bench,
    "pipeline": _cmd_pipeline,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    _apply_jobs(args.jobs)
    from .errors import ModeboostError

    try:
        return _HANDLERS[args.command](args)
    except SystemExit as exc:
        if exc.code and not isinstance(exc.code, int):
            print(exc.code, file=sys.stderr)
            return 1
        return exc.code or 0
    except (ModeboostError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
