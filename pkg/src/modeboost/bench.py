"""Inference latency and memory-footprint benchmarking.

Two latency figures are reported because they answer different questions:
batch latency times one vectorized call over the whole batch, per-record
latency times single-row predictions in a loop (the streaming pattern of a
minute-by-minute feed).  Timing loops are single-threaded and read-only;
predictions are verified identical across repeats.
"""

from __future__ import annotations

import csv
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .gbtree import Ensemble, estimated_resident_bytes, serialized_size

DEFAULT_BATCH = 3500
DEFAULT_WARMUP = 3
DEFAULT_REPEATS = 10


def host_descriptor() -> str:
    return (
        f"{platform.system()} {platform.machine()} | {platform.processor() or 'unknown cpu'} | "
        f"python {platform.python_version()}"
    )


@dataclass
class BenchReport:
    label: str
    task: str
    horizon: int | None
    batch_size: int
    repeats: int
    batch_total_ms: float  # mean wall time of one full batch call
    batch_samples_ms: list[float]
    per_record_mean_ms: float
    p50_ms: float
    p95_ms: float
    p99_ms: float
    records_per_second: float
    model_bytes: int
    resident_bytes: int
    host: str = field(default_factory=host_descriptor)

    def csv_row(self) -> list:
        return [
            "" if self.horizon is None else self.horizon,
            self.task,
            self.batch_size,
            repr(self.batch_total_ms),
            repr(self.per_record_mean_ms),
            repr(self.p50_ms),
            repr(self.p95_ms),
            repr(self.p99_ms),
            repr(self.records_per_second),
            self.model_bytes,
        ]


BENCH_CSV_HEADER = [
    "horizon",
    "task",
    "batch_size",
    "total_ms",
    "per_record_mean_ms",
    "p50",
    "p95",
    "p99",
    "records_per_s",
    "model_bytes",
]


def _cycle_rows(rows: np.ndarray, batch_size: int) -> np.ndarray:
    if len(rows) >= batch_size:
        return np.ascontiguousarray(rows[:batch_size])
    reps = -(-batch_size // len(rows))
    return np.ascontiguousarray(np.tile(rows, (reps, 1))[:batch_size])


def bench_inference(
    ensemble: Ensemble,
    rows: np.ndarray,
    batch_size: int = DEFAULT_BATCH,
    warmup: int = DEFAULT_WARMUP,
    repeats: int = DEFAULT_REPEATS,
    per_record_samples: int | None = None,
    label: str = "model",
) -> BenchReport:
    """Time batch and single-record prediction on a monotonic clock.

    Shorter inputs are cycled up to ``batch_size``.  Warmup iterations are
    excluded; percentile statistics come from the single-record loop.
    """
    batch = _cycle_rows(np.asarray(rows, dtype=np.float64), batch_size)
    reference = None
    for _ in range(max(warmup, 1)):
        reference = ensemble.predict(batch)

    batch_samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        pred = ensemble.predict(batch)
        batch_samples.append((time.perf_counter() - t0) * 1000.0)
        if not np.array_equal(pred, reference):
            raise RuntimeError("predictions changed between timed repeats")

    n_single = per_record_samples if per_record_samples is not None else batch_size
    n_single = min(n_single, batch_size)
    single_rows = [batch[i] for i in range(n_single)]
    for row in single_rows[: min(32, n_single)]:
        ensemble.predict_one(row)  # warm the fast tables
    latencies = np.empty(n_single)
    for i, row in enumerate(single_rows):
        t0 = time.perf_counter()
        ensemble.predict_one(row)
        latencies[i] = (time.perf_counter() - t0) * 1000.0

    batch_mean = float(np.mean(batch_samples))
    return BenchReport(
        label=label,
        task=ensemble.task,
        horizon=ensemble.horizon,
        batch_size=batch_size,
        repeats=repeats,
        batch_total_ms=batch_mean,
        batch_samples_ms=[float(s) for s in batch_samples],
        per_record_mean_ms=float(latencies.mean()),
        p50_ms=float(np.percentile(latencies, 50)),
        p95_ms=float(np.percentile(latencies, 95)),
        p99_ms=float(np.percentile(latencies, 99)),
        records_per_second=float(batch_size / (batch_mean / 1000.0)),
        model_bytes=serialized_size(ensemble),
        resident_bytes=estimated_resident_bytes(ensemble),
    )


def model_footprint(ensemble: Ensemble) -> tuple[int, int]:
    """(exact serialized bytes, analytic resident estimate)."""
    return serialized_size(ensemble), estimated_resident_bytes(ensemble)


def bench_suite(
    models: Sequence[Ensemble],
    rows: np.ndarray,
    batch_size: int = DEFAULT_BATCH,
    warmup: int = DEFAULT_WARMUP,
    repeats: int = DEFAULT_REPEATS,
    per_record_samples: int | None = 500,
) -> list[BenchReport]:
    """One report per model (typically one per horizon and task)."""
    return [
        bench_inference(
            m,
            rows,
            batch_size=batch_size,
            warmup=warmup,
            repeats=repeats,
            per_record_samples=per_record_samples,
            label=f"{m.task}_h{m.horizon}",
        )
        for m in models
    ]


def bench_featurization(panel, config, holidays=None) -> float:
    """Milliseconds per produced row for full feature extraction.

    Reported separately from model latency so deployments can budget the
    feature step independently of tree traversal.
    """
    from .features import assemble_matrix

    t0 = time.perf_counter()
    matrix = assemble_matrix(panel, config, horizons=(5,), holidays=holidays)
    elapsed_ms = (time.perf_counter() - t0) * 1000.0
    return elapsed_ms / max(matrix.n_rows, 1)


def write_bench_csv(reports: Sequence[BenchReport], path: str | Path, featurize_ms_per_row: float | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# host: {host_descriptor()}\n")
        if featurize_ms_per_row is not None:
            fh.write(f"# featurize_ms_per_row: {featurize_ms_per_row!r}\n")
        writer = csv.writer(fh)
        writer.writerow(BENCH_CSV_HEADER)
        for report in reports:
            writer.writerow(report.csv_row())
