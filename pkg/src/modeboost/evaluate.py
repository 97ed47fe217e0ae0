"""Metrics, model comparison tests, and the evaluation harnesses.

All metrics are computed on the test partition only, per entity and pooled.
Significance tests compare two models' per-timestamp absolute errors pooled
over entities.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .baselines import BASELINE_KINDS, make_baseline
from .core import DemandPanel, SplitIndices
from .errors import (
    AllZeroDifferences,
    EmptySample,
    LabelOutOfRange,
    LengthMismatch,
    NoTestRows,
    SingleEntity,
)
from .features import FeatureMatrix
from .gbtree import Ensemble, TrainParams, fit, serialized_size
from .labeling import demand_level, scale_to_peak
from .postprocess import fit_scaler
from .stats import TestResult, paired_t_test, wilcoxon_signed_rank

POOLED = "__pooled__"


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def _paired(y, yhat) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(y, dtype=np.float64)
    b = np.asarray(yhat, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise EmptySample("metric on empty sample")
    return a, b


def rmse(y, yhat) -> float:
    a, b = _paired(y, yhat)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def mae(y, yhat) -> float:
    a, b = _paired(y, yhat)
    return float(np.mean(np.abs(a - b)))


def accuracy(labels, preds) -> float:
    a, b = _paired(labels, preds)
    return float(np.mean(a == b))


def macro_f1(labels, preds, n_classes: int = 3, weighted: bool = False) -> float:
    """Per-class F1 averaged without weights (a zero denominator scores 0)."""
    a, b = _paired(labels, preds)
    a = a.astype(np.int64)
    b = b.astype(np.int64)
    if a.min() < 0 or a.max() >= n_classes or b.min() < 0 or b.max() >= n_classes:
        raise LabelOutOfRange(f"labels must lie in [0, {n_classes})")
    f1s = np.zeros(n_classes)
    support = np.zeros(n_classes)
    for c in range(n_classes):
        tp = float(np.sum((a == c) & (b == c)))
        fp = float(np.sum((a != c) & (b == c)))
        fn = float(np.sum((a == c) & (b != c)))
        denom = 2 * tp + fp + fn
        f1s[c] = 2 * tp / denom if denom > 0 else 0.0
        support[c] = float(np.sum(a == c))
    if weighted:
        return float((f1s * support).sum() / support.sum())
    return float(f1s.mean())


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricRow:
    entity: str
    horizon: int
    model: str
    metric: str
    value: float


@dataclass(frozen=True)
class ComparisonRow:
    model_a: str
    model_b: str
    horizon: int
    result: TestResult


@dataclass
class EvalReport:
    task: str
    rows: list[MetricRow]
    comparisons: list[ComparisonRow]
    metadata: dict = field(default_factory=dict)

    def value(self, entity: str, horizon: int, model: str, metric: str) -> float:
        for row in self.rows:
            if (row.entity, row.horizon, row.model, row.metric) == (entity, horizon, model, metric):
                return row.value
        raise KeyError((entity, horizon, model, metric))

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["entity", "horizon", "model", "metric", "value"])
            for row in self.rows:
                writer.writerow([row.entity, row.horizon, row.model, row.metric, repr(row.value)])

    def write_significance_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["model_a", "model_b", "horizon", "method", "statistic", "p_value", "n"])
            for comp in self.comparisons:
                writer.writerow(
                    [
                        comp.model_a,
                        comp.model_b,
                        comp.horizon,
                        comp.result.method,
                        repr(comp.result.statistic),
                        repr(comp.result.p_value),
                        comp.result.n,
                    ]
                )


# ---------------------------------------------------------------------------
# prediction collection
# ---------------------------------------------------------------------------

def _baseline_predictions(
    kind: str,
    panel: DemandPanel,
    matrix: FeatureMatrix,
    test_mask: np.ndarray,
    horizon: int,
    **baseline_kwargs,
) -> np.ndarray:
    """Forecasts for the matrix's test rows, computed entity by entity."""
    start_minute = int(panel.grid.minutes_since_epoch()[0])
    codes = matrix.entity_codes
    out = np.empty(int(test_mask.sum()))
    positions = np.nonzero(test_mask)[0]
    row_codes = codes[positions]
    row_steps = matrix.steps[positions]
    for code, name in enumerate(matrix.entity_names):
        sel = row_codes == code
        if not sel.any():
            continue
        model = make_baseline(kind, **baseline_kwargs)
        model.fit(panel.by_name(name).values, matrix.split, start_minute)
        out[sel] = model.forecast(row_steps[sel], horizon)
    return out


def _classify_forecast(values: np.ndarray, codes: np.ndarray, peaks: np.ndarray, tolerance: float) -> np.ndarray:
    scaled = np.where(peaks[codes] > 0, 100.0 * values / np.maximum(peaks[codes], 1e-300), 0.0)
    return demand_level(scaled, tolerance)


def run_evaluation(
    panel: DemandPanel,
    matrix: FeatureMatrix,
    ensembles: Mapping[str, Mapping[int, Ensemble]] | None = None,
    baselines: Sequence[str] = (),
    horizons: Sequence[int] | None = None,
    task: str = "regression",
    compare: Sequence[tuple[str, str]] | None = None,
    metadata: dict | None = None,
    **baseline_kwargs,
) -> EvalReport:
    """Score every model per entity and horizon on the test partition.

    ``ensembles`` maps model name -> horizon -> trained ensemble;
    ``baselines`` names entries of ``ha|snaive|ses|croston``.  ``compare``
    lists model-name pairs for paired significance tests on pooled absolute
    errors (defaults to every ensemble against every baseline).
    """
    ensembles = ensembles or {}
    horizons = tuple(horizons) if horizons is not None else matrix.horizons
    test_mask = matrix.rows_test()
    if not test_mask.any():
        raise NoTestRows("the matrix has no test rows")
    for kind in baselines:
        if kind not in BASELINE_KINDS:
            raise ValueError(f"unknown baseline {kind!r}")

    codes = matrix.entity_codes[test_mask]
    rows: list[MetricRow] = []
    comparisons: list[ComparisonRow] = []
    # model -> horizon -> (predictions, truth) on test rows
    preds: dict[str, dict[int, np.ndarray]] = {}
    truth: dict[int, np.ndarray] = {}

    for h in horizons:
        truth[h] = (matrix.y_cls[h] if task == "classification" else matrix.y_reg[h])[test_mask]

    for name, per_horizon in ensembles.items():
        preds[name] = {}
        for h in horizons:
            ensemble = per_horizon[h]
            preds[name][h] = ensemble.predict(matrix.X[test_mask]).astype(np.float64)
    for kind in baselines:
        preds[kind] = {}
        for h in horizons:
            forecast = _baseline_predictions(kind, panel, matrix, test_mask, h, **baseline_kwargs)
            if task == "classification":
                forecast = _classify_forecast(
                    forecast, codes, matrix.peaks, matrix.label_tolerance
                ).astype(np.float64)
            preds[kind][h] = forecast

    entities = list(matrix.entity_names)
    for model_name, per_horizon in preds.items():
        for h in horizons:
            p = per_horizon[h]
            y = truth[h]
            groups = [(POOLED, np.ones(len(y), dtype=bool))] + [
                (name, codes == code) for code, name in enumerate(entities)
            ]
            for entity, sel in groups:
                if not sel.any():
                    continue
                if task == "classification":
                    rows.append(MetricRow(entity, h, model_name, "accuracy", accuracy(y[sel], p[sel])))
                    rows.append(MetricRow(entity, h, model_name, "macro_f1", macro_f1(y[sel], p[sel])))
                else:
                    rows.append(MetricRow(entity, h, model_name, "rmse", rmse(y[sel], p[sel])))
                    rows.append(MetricRow(entity, h, model_name, "mae", mae(y[sel], p[sel])))

    if compare is None:
        compare = [(e, b) for e in ensembles for b in baselines]
    for model_a, model_b in compare:
        for h in horizons:
            err_a = np.abs(preds[model_a][h] - truth[h])
            err_b = np.abs(preds[model_b][h] - truth[h])
            comparisons.append(ComparisonRow(model_a, model_b, h, paired_t_test(err_a, err_b)))
            try:
                wres = wilcoxon_signed_rank(err_a, err_b)
            except AllZeroDifferences:
                # Identical error vectors (e.g. a model against itself).
                wres = TestResult(0.0, 1.0, len(err_a), "wilcoxon")
            comparisons.append(ComparisonRow(model_a, model_b, h, wres))

    meta = {
        "task": task,
        "split": (matrix.split.train_end, matrix.split.valid_end, matrix.split.length),
        "config_hash": matrix.config_hash,
        "baseline_params": dict(baseline_kwargs),
    }
    if metadata:
        meta.update(metadata)
    return EvalReport(task=task, rows=rows, comparisons=comparisons, metadata=meta)


# ---------------------------------------------------------------------------
# pooled vs per-entity training
# ---------------------------------------------------------------------------

@dataclass
class GlobalLocalReport:
    rows: list[MetricRow]
    pooled_seconds: float
    local_seconds: float
    pooled_bytes: int
    local_bytes: int

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["entity", "horizon", "model", "metric", "value"])
            for row in self.rows:
                writer.writerow([row.entity, row.horizon, row.model, row.metric, repr(row.value)])
            writer.writerow([POOLED, "", "pooled", "train_seconds", repr(self.pooled_seconds)])
            writer.writerow([POOLED, "", "local", "train_seconds", repr(self.local_seconds)])
            writer.writerow([POOLED, "", "pooled", "model_bytes", self.pooled_bytes])
            writer.writerow([POOLED, "", "local", "model_bytes", self.local_bytes])


def global_vs_local(
    matrix: FeatureMatrix,
    params: TrainParams,
    horizons: Sequence[int] | None = None,
) -> GlobalLocalReport:
    """Train one pooled model and one model per entity with identical params.

    Reports per-entity test MAE/RMSE for both regimes plus total training
    wall time and total serialized model bytes per regime.
    """
    if len(matrix.entity_names) < 2:
        raise SingleEntity("global-vs-local comparison needs at least two entities")
    horizons = tuple(horizons) if horizons is not None else matrix.horizons
    train_mask = matrix.rows_train()
    test_mask = matrix.rows_test()
    codes = matrix.entity_codes
    rows: list[MetricRow] = []
    pooled_seconds = local_seconds = 0.0
    pooled_bytes = local_bytes = 0

    scaler = fit_scaler(matrix)
    for h in horizons:
        y = matrix.y_reg[h]
        t0 = time.perf_counter()
        pooled = fit(
            matrix.X[train_mask], y[train_mask], params, matrix.feature_names, scaler=scaler
        )
        pooled_seconds += time.perf_counter() - t0
        pooled_bytes += serialized_size(pooled)
        pooled_pred = pooled.predict(matrix.X[test_mask])

        for code, name in enumerate(matrix.entity_names):
            local_train = train_mask & (codes == code)
            local_test = test_mask & (codes == code)
            t0 = time.perf_counter()
            local_model = fit(
                matrix.X[local_train], y[local_train], params, matrix.feature_names, scaler=scaler
            )
            local_seconds += time.perf_counter() - t0
            local_bytes += serialized_size(local_model)
            local_pred = local_model.predict(matrix.X[local_test])
            y_true = y[local_test]
            pooled_sel = pooled_pred[codes[test_mask] == code]
            rows.append(MetricRow(name, h, "pooled", "mae", mae(y_true, pooled_sel)))
            rows.append(MetricRow(name, h, "pooled", "rmse", rmse(y_true, pooled_sel)))
            rows.append(MetricRow(name, h, "local", "mae", mae(y_true, local_pred)))
            rows.append(MetricRow(name, h, "local", "rmse", rmse(y_true, local_pred)))

    return GlobalLocalReport(
        rows=rows,
        pooled_seconds=pooled_seconds,
        local_seconds=local_seconds,
        pooled_bytes=pooled_bytes,
        local_bytes=local_bytes,
    )


def daily_totals_csv(panel: DemandPanel, path: str | Path) -> None:
    """Plot-ready entity-by-day demand totals (heatmap input)."""
    length = panel.grid.length
    n_days = (length + 1439) // 1440
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["entity", "day", "total"])
        for series in panel.series:
            for d in range(n_days):
                chunk = series.values[d * 1440 : (d + 1) * 1440]
                writer.writerow([series.entity.name, d, int(chunk.sum())])
