"""Causal per-entity feature extraction and feature-matrix assembly.

Every feature at step t is a function of that entity's demand history up to
and including t plus the calendar, so appending future observations never
changes existing rows.  Families:

* lagged demand at fixed offsets;
* rolling mean / rolling max over sliding windows;
* exponentially weighted moving averages with alpha = 2/(N+1);
* adjusted demand (quantile-level multipliers) and rolling coefficient of
  variation;
* trailing-window Fourier harmonics and their low-order reconstruction;
* calendar fields (minute, hour, weekday, month, meteorological quarter,
  holiday halo).

Rows whose longest-memory feature has not warmed up yet are dropped during
assembly rather than zero-filled.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import datetime
from typing import NamedTuple, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import lfilter

from .core import DemandPanel, SplitIndices
from .errors import InsufficientHistory, NoUsableRows
from .ingest import HolidayCalendar
from .labeling import LabelConfig, build_targets, compute_peaks

# Integer-coded columns that normalization must pass through untouched.
CATEGORICAL_FEATURES = frozenset(
    {
        "entity_code",
        "minute_of_hour",
        "hour_of_day",
        "day_of_week",
        "month_of_year",
        "quarter_of_year",
        "is_holiday_period",
    }
)

# Fixed GEMM block height for the Fourier windows; padding every block to
# this height keeps results bit-identical when the series grows.
_FOURIER_CHUNK = 4096


class FeatureColumn(NamedTuple):
    values: np.ndarray
    first_valid: int


@dataclass(frozen=True)
class FeatureConfig:
    lag_offsets: tuple[int, ...] = (1, 5, 15, 60, 1440)
    rolling_windows: tuple[int, ...] = (5, 10, 60, 1440)
    ewma_spans: tuple[int, ...] = (5, 10, 60, 1440)
    cv_windows: tuple[int, ...] = (60, 1440)
    fourier_period: int = 1440
    fourier_harmonics: int = 3
    fourier_static: bool = False
    adjusted_levels: int = 3
    adjusted_scale: float = 2.0
    adjusted_direction: str = "monotone"  # or "compress"
    timezone_offset_minutes: int = 0
    include_lags: bool = True
    include_rolling: bool = True
    include_ewma: bool = True
    include_adjusted: bool = True
    include_cv: bool = True
    include_fourier: bool = True
    include_calendar: bool = True

    def __post_init__(self) -> None:
        for group, vals in (
            ("lag_offsets", self.lag_offsets),
            ("rolling_windows", self.rolling_windows),
            ("ewma_spans", self.ewma_spans),
            ("cv_windows", self.cv_windows),
        ):
            if any(v < 1 for v in vals):
                raise ValueError(f"{group} entries must be >= 1")
        if self.fourier_harmonics < 1:
            raise ValueError("need at least one Fourier harmonic")
        if self.fourier_period < 4:
            raise ValueError("Fourier period must be >= 4")
        if self.adjusted_scale <= 1.0:
            raise ValueError("adjusted scale must exceed 1")
        if self.adjusted_levels < 3 or self.adjusted_levels % 2 == 0:
            raise ValueError("adjusted levels must be odd and >= 3")
        if self.adjusted_direction not in ("monotone", "compress"):
            raise ValueError(f"unknown adjusted_direction {self.adjusted_direction!r}")


# ---------------------------------------------------------------------------
# temporal families
# ---------------------------------------------------------------------------

def lag_features(values: np.ndarray, offsets: Sequence[int]) -> dict[str, FeatureColumn]:
    """lag_tau[t] = demand at t - tau; invalid for t < tau."""
    x = np.asarray(values, dtype=np.float64)
    out = {}
    for tau in offsets:
        col = np.zeros_like(x)
        if tau < len(x):
            col[tau:] = x[:-tau]
        out[f"lag_{tau}"] = FeatureColumn(col, min(tau, len(x)))
    return out


def _rolling_mean(x: np.ndarray, w: int) -> np.ndarray:
    n = len(x)
    csum = np.concatenate(([0.0], np.cumsum(x)))
    starts = np.maximum(np.arange(n) - w + 1, 0)
    counts = np.minimum(np.arange(1, n + 1), w)
    return (csum[1:] - csum[starts]) / counts


def _rolling_max(x: np.ndarray, w: int) -> np.ndarray:
    n = len(x)
    out = np.empty(n)
    head = min(w - 1, n)
    if head:
        out[:head] = np.maximum.accumulate(x[:head])
    if n >= w:
        out[w - 1 :] = sliding_window_view(x, w).max(axis=1)
    return out


def rolling_features(values: np.ndarray, windows: Sequence[int]) -> dict[str, FeatureColumn]:
    """Rolling mean and max over trailing windows.

    Before a window fills, the statistic covers the available prefix; those
    steps are still flagged as warm-up so assembly can drop them.
    """
    x = np.asarray(values, dtype=np.float64)
    out = {}
    for w in windows:
        out[f"roll_mean_{w}"] = FeatureColumn(_rolling_mean(x, w), w - 1)
        out[f"roll_max_{w}"] = FeatureColumn(_rolling_max(x, w), w - 1)
    return out


def ewma_features(values: np.ndarray, spans: Sequence[int]) -> dict[str, FeatureColumn]:
    """EWMA_t = alpha * D_t + (1 - alpha) * EWMA_{t-1}, alpha = 2/(N+1), seeded at D_1."""
    x = np.asarray(values, dtype=np.float64)
    out = {}
    for span in spans:
        alpha = 2.0 / (span + 1.0)
        y, _ = lfilter([alpha], [1.0, -(1.0 - alpha)], x, zi=[(1.0 - alpha) * x[0]])
        out[f"ewma_{span}"] = FeatureColumn(y, 0)
    return out


def rolling_cv(values: np.ndarray, windows: Sequence[int]) -> dict[str, FeatureColumn]:
    """Coefficient of variation (sample std / mean) on trailing windows; 0 at zero mean."""
    x = np.asarray(values, dtype=np.float64)
    n = len(x)
    csum = np.concatenate(([0.0], np.cumsum(x)))
    csum2 = np.concatenate(([0.0], np.cumsum(x * x)))
    out = {}
    for w in windows:
        starts = np.maximum(np.arange(n) - w + 1, 0)
        counts = np.minimum(np.arange(1, n + 1), w).astype(np.float64)
        s = csum[1:] - csum[starts]
        s2 = csum2[1:] - csum2[starts]
        mean = s / counts
        var = np.zeros(n)
        multi = counts > 1
        var[multi] = np.maximum(0.0, (s2[multi] - s[multi] * mean[multi]) / (counts[multi] - 1.0))
        sd = np.sqrt(var)
        cv = np.divide(sd, mean, out=np.zeros(n), where=mean != 0)
        out[f"cv_{w}"] = FeatureColumn(cv, w - 1)
    return out


# ---------------------------------------------------------------------------
# Fourier family
# ---------------------------------------------------------------------------

def fourier_coefficients(
    values: np.ndarray, period: int, harmonics: int, end_step: int
) -> dict[str, float]:
    """Harmonics of the trailing window of ``period`` steps ending at ``end_step``.

    a_k = (2/P) sum_j D_j cos(2*pi*j*k/P) and b_k likewise with sine, where j
    runs 1..P over the window.  ``end_step`` counts steps, so the window is
    ``values[end_step - period : end_step]``.
    """
    x = np.asarray(values, dtype=np.float64)
    if end_step < period or end_step > len(x):
        raise InsufficientHistory(
            f"need a complete trailing period: end_step={end_step}, period={period}"
        )
    window = x[end_step - period : end_step]
    j = np.arange(1, period + 1, dtype=np.float64)
    out: dict[str, float] = {}
    for k in range(1, harmonics + 1):
        angle = 2.0 * np.pi * j * k / period
        out[f"a_{k}"] = float(2.0 / period * np.dot(window, np.cos(angle)))
        out[f"b_{k}"] = float(2.0 / period * np.dot(window, np.sin(angle)))
    return out


def fourier_reconstruction(coeffs: dict[str, float], t_in_period: float, period: int) -> float:
    """Evaluate the truncated series sum_k a_k cos(2*pi*k*t/P) + b_k sin(2*pi*k*t/P)."""
    total = 0.0
    k = 1
    while f"a_{k}" in coeffs:
        angle = 2.0 * np.pi * k * t_in_period / period
        total += coeffs[f"a_{k}"] * np.cos(angle) + coeffs[f"b_{k}"] * np.sin(angle)
        k += 1
    return float(total)


def _fourier_basis(period: int, harmonics: int) -> np.ndarray:
    j = np.arange(1, period + 1, dtype=np.float64)
    basis = np.empty((period, 2 * harmonics))
    for k in range(1, harmonics + 1):
        angle = 2.0 * np.pi * j * k / period
        basis[:, 2 * (k - 1)] = np.cos(angle) * (2.0 / period)
        basis[:, 2 * k - 1] = np.sin(angle) * (2.0 / period)
    return basis


def fourier_columns(
    values: np.ndarray, period: int, harmonics: int
) -> dict[str, FeatureColumn]:
    """Per-step trailing-window harmonics plus the denoised current value.

    The window at step t spans t-P+1..t; the reconstruction feature
    evaluates the truncated series at the window end (local index j = P),
    i.e. the sum of the cosine coefficients.

    Blocks of windows are multiplied against the basis in fixed-height
    chunks (zero-padded), so outputs do not shift when the series grows.
    """
    x = np.asarray(values, dtype=np.float64)
    n = len(x)
    names = [f"fourier_a_{k}" for k in range(1, harmonics + 1)]
    names += [f"fourier_b_{k}" for k in range(1, harmonics + 1)]
    coef = np.zeros((n, 2 * harmonics))
    if n >= period:
        basis = _fourier_basis(period, harmonics)
        windows = sliding_window_view(x, period)  # row i ends at step i + period - 1
        block = np.zeros((_FOURIER_CHUNK, period))
        for s in range(0, windows.shape[0], _FOURIER_CHUNK):
            m = min(_FOURIER_CHUNK, windows.shape[0] - s)
            block[:m] = windows[s : s + m]
            block[m:] = 0.0
            prod = block @ basis  # interleaved (a_1, b_1, a_2, b_2, ...)
            coef[s + period - 1 : s + period - 1 + m, :harmonics] = prod[:m, 0::2]
            coef[s + period - 1 : s + period - 1 + m, harmonics:] = prod[:m, 1::2]
    first_valid = min(period - 1, n)
    out = {name: FeatureColumn(coef[:, i].copy(), first_valid) for i, name in enumerate(names)}
    recon = coef[:, :harmonics].sum(axis=1)
    out["fourier_recon"] = FeatureColumn(recon, first_valid)
    return out


def fourier_static_columns(
    values: np.ndarray, period: int, harmonics: int, train_end: int
) -> dict[str, FeatureColumn]:
    """Constant harmonics fitted once on the last full training period.

    The reconstruction follows each step's phase relative to that window.
    Like any training-span statistic, rows earlier in the training span see
    coefficients estimated from later training steps.
    """
    if train_end < period:
        raise InsufficientHistory(
            f"training span of {train_end} steps is shorter than the period {period}"
        )
    coeffs = fourier_coefficients(values, period, harmonics, train_end)
    n = len(values)
    out: dict[str, FeatureColumn] = {}
    for k in range(1, harmonics + 1):
        out[f"fourier_a_{k}"] = FeatureColumn(np.full(n, coeffs[f"a_{k}"]), 0)
        out[f"fourier_b_{k}"] = FeatureColumn(np.full(n, coeffs[f"b_{k}"]), 0)
    j = ((np.arange(n) - (train_end - period)) % period) + 1
    recon = np.zeros(n)
    for k in range(1, harmonics + 1):
        angle = 2.0 * np.pi * k * j / period
        recon += coeffs[f"a_{k}"] * np.cos(angle) + coeffs[f"b_{k}"] * np.sin(angle)
    out["fourier_recon"] = FeatureColumn(recon, 0)
    return out


# ---------------------------------------------------------------------------
# adjusted demand
# ---------------------------------------------------------------------------

def training_quantile_cuts(train_values: np.ndarray, levels: int) -> np.ndarray | None:
    """Level boundaries from the training span; None when all values are equal."""
    x = np.asarray(train_values, dtype=np.float64)
    if x.size == 0 or x.min() == x.max():
        return None
    qs = np.arange(1, levels) / levels
    return np.quantile(x, qs)


def adjusted_demand(
    values: np.ndarray,
    cuts: np.ndarray | None,
    scale: float = 2.0,
    direction: str = "monotone",
) -> FeatureColumn:
    """Demand rescaled by its quantile level's multiplier.

    With L levels the center level keeps multiplier 1 and each step away
    multiplies by ``scale`` (monotone direction: higher level, larger
    multiplier) or divides by it (compress direction).  Degenerate training
    spans (no spread) leave the demand unchanged.
    """
    x = np.asarray(values, dtype=np.float64)
    if cuts is None:
        return FeatureColumn(x.copy(), 0)
    levels = np.searchsorted(cuts, x, side="right").astype(np.float64)
    center = len(cuts) / 2.0  # (L - 1) / 2 with L = len(cuts) + 1
    sign = 1.0 if direction == "monotone" else -1.0
    multiplier = np.power(scale, sign * (levels - center))
    return FeatureColumn(multiplier * x, 0)


# ---------------------------------------------------------------------------
# calendar family
# ---------------------------------------------------------------------------

_QUARTER_OF_MONTH = np.array([1, 1, 2, 2, 2, 3, 3, 3, 4, 4, 4, 1])  # meteorological


def calendar_features(
    grid_minutes: np.ndarray,
    timezone_offset_minutes: int = 0,
    holidays: HolidayCalendar | None = None,
) -> dict[str, FeatureColumn]:
    """Local-time calendar columns from absolute minute indices.

    ``grid_minutes`` are minutes since 1970-01-01T00:00 UTC; the offset
    shifts into local wall-clock time before decomposing.  Weekday 0 is
    Monday, month 0 January; quarters are meteorological so December through
    February form quarter 1.  ``is_holiday_period`` is 1 on a holiday and on
    the days directly before and after.
    """
    local = np.asarray(grid_minutes, dtype=np.int64) + timezone_offset_minutes
    days = local // 1440
    minute_of_day = local - days * 1440
    dates = days.astype("datetime64[D]")
    months = (dates.astype("datetime64[M]") - dates.astype("datetime64[Y]").astype("datetime64[M]")).astype(np.int64)
    cols = {
        "minute_of_hour": (minute_of_day % 60).astype(np.float64),
        "hour_of_day": (minute_of_day // 60).astype(np.float64),
        "day_of_week": ((days + 3) % 7).astype(np.float64),  # epoch day 0 was a Thursday
        "month_of_year": months.astype(np.float64),
        "quarter_of_year": _QUARTER_OF_MONTH[months].astype(np.float64),
    }
    if holidays is not None and holidays.dates:
        halo = set()
        for d in holidays.dates:
            halo.update(np.arange(-1, 2) + np.datetime64(d, "D"))
        flagged = np.isin(dates, np.array(sorted(halo)))
        cols["is_holiday_period"] = flagged.astype(np.float64)
    else:
        cols["is_holiday_period"] = np.zeros(len(local))
    return {name: FeatureColumn(arr, 0) for name, arr in cols.items()}


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

@dataclass
class FeatureMatrix:
    """Row-per-(entity, step) features plus per-horizon targets.

    Rows are ordered by (entity code, step).  The entity code is both a
    feature column and, with ``steps``, the row's identity.
    """

    feature_names: list[str]
    X: np.ndarray
    steps: np.ndarray
    entity_names: list[str]
    horizons: tuple[int, ...]
    y_reg: dict[int, np.ndarray]
    y_cls: dict[int, np.ndarray]
    split: SplitIndices
    grid_start: datetime
    label_tolerance: float
    peaks: np.ndarray
    scaled: bool = False
    config_hash: str = ""

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.feature_names.index(name)]

    @property
    def entity_codes(self) -> np.ndarray:
        return self.column("entity_code").astype(np.int64)

    def rows_train(self) -> np.ndarray:
        return self.steps < self.split.train_end

    def rows_valid(self, horizon: int | None = None) -> np.ndarray:
        mask = (self.steps >= self.split.train_end) & (self.steps < self.split.valid_end)
        if horizon is not None:
            # Keep the validation targets inside the validation span so test
            # observations can never steer early stopping or tuning.
            mask &= self.steps + horizon < self.split.valid_end
        return mask

    def rows_test(self) -> np.ndarray:
        return self.steps >= self.split.valid_end

    def with_x(self, new_x: np.ndarray, scaled: bool) -> "FeatureMatrix":
        return replace(self, X=new_x, scaled=scaled)


def _entity_columns(
    values: np.ndarray,
    code: int,
    config: FeatureConfig,
    calendar: dict[str, FeatureColumn],
    train_end: int,
) -> tuple[list[str], list[FeatureColumn]]:
    n = len(values)
    x = values.astype(np.float64)
    named: list[tuple[str, FeatureColumn]] = [
        ("entity_code", FeatureColumn(np.full(n, float(code)), 0)),
        ("demand", FeatureColumn(x, 0)),
    ]
    if config.include_lags:
        named += list(lag_features(x, config.lag_offsets).items())
    if config.include_rolling:
        named += list(rolling_features(x, config.rolling_windows).items())
    if config.include_ewma:
        named += list(ewma_features(x, config.ewma_spans).items())
    if config.include_adjusted:
        cuts = training_quantile_cuts(x[:train_end], config.adjusted_levels)
        named.append(
            (
                "adjusted_demand",
                adjusted_demand(x, cuts, config.adjusted_scale, config.adjusted_direction),
            )
        )
    if config.include_cv:
        named += list(rolling_cv(x, config.cv_windows).items())
    if config.include_fourier:
        if config.fourier_static:
            fc = fourier_static_columns(
                x, config.fourier_period, config.fourier_harmonics, train_end
            )
        else:
            fc = fourier_columns(x, config.fourier_period, config.fourier_harmonics)
        named += list(fc.items())
    if config.include_calendar:
        named += list(calendar.items())
    return [name for name, _ in named], [col for _, col in named]


def assemble_matrix(
    panel: DemandPanel,
    config: FeatureConfig,
    horizons: Sequence[int],
    label_config: LabelConfig | None = None,
    split: SplitIndices | None = None,
    holidays: HolidayCalendar | None = None,
) -> FeatureMatrix:
    """Extract features independently per entity and merge into one matrix.

    All training-span statistics (quantile cuts, peaks, static harmonics)
    are computed strictly on steps before ``split.train_end``.  Rows are
    kept only when every enabled feature has warmed up and every horizon's
    target index stays on the grid.
    """
    from .core import chronological_split

    horizons = tuple(sorted(int(h) for h in horizons))
    if not horizons:
        raise ValueError("need at least one horizon")
    label_config = label_config or LabelConfig()
    split = split or chronological_split(panel)
    max_h = horizons[-1]
    n = panel.grid.length

    targets = build_targets(panel, split, horizons, label_config)
    peaks = compute_peaks(panel, split, label_config)
    calendar = calendar_features(
        panel.grid.minutes_since_epoch(), config.timezone_offset_minutes, holidays
    )

    names: list[str] | None = None
    x_blocks: list[np.ndarray] = []
    step_blocks: list[np.ndarray] = []
    reg_blocks: dict[int, list[np.ndarray]] = {h: [] for h in horizons}
    cls_blocks: dict[int, list[np.ndarray]] = {h: [] for h in horizons}

    for series in panel.series:
        entity_names, cols = _entity_columns(
            series.values, series.entity.code, config, calendar, split.train_end
        )
        if names is None:
            names = entity_names
        warmup = max(col.first_valid for col in cols)
        last = n - 1 - max_h
        if warmup > last:
            continue
        rows = np.arange(warmup, last + 1)
        block = np.column_stack([col.values[rows] for col in cols])
        x_blocks.append(block)
        step_blocks.append(rows.astype(np.int64))
        for h in horizons:
            reg, cls = targets[h][series.entity.name]
            reg_blocks[h].append(reg[rows])
            cls_blocks[h].append(cls[rows])

    if not x_blocks or names is None:
        raise NoUsableRows(
            "no rows survive warm-up and horizon trimming; the panel is too short"
        )
    return FeatureMatrix(
        feature_names=names,
        X=np.concatenate(x_blocks),
        steps=np.concatenate(step_blocks),
        entity_names=panel.entity_names(),
        horizons=horizons,
        y_reg={h: np.concatenate(reg_blocks[h]) for h in horizons},
        y_cls={h: np.concatenate(cls_blocks[h]) for h in horizons},
        split=split,
        grid_start=panel.grid.start,
        label_tolerance=label_config.tolerance,
        peaks=peaks,
    )
