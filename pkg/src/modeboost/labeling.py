"""Low/Medium/High demand classes and per-horizon forecast targets.

The class of a demand value is derived from its position relative to the
entity's training-span peak: with the peak scaled to 100 and a symmetric
tolerance ``d``, Medium covers [50-d, 50+d), Low sits below, High at or
above.  The default d is 20.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .core import DemandPanel, SplitIndices
from .errors import HorizonExceedsGrid

DEFAULT_HORIZONS = (5, 15, 30, 60)


class DemandLevel(IntEnum):
    LOW = 0
    MEDIUM = 1
    HIGH = 2


@dataclass(frozen=True)
class LabelConfig:
    """Class-boundary settings.

    peak_scope: 'per_entity' scales each entity by its own training peak,
        'global' uses the panel-wide training maximum.
    peak_kind: 'instant_max' takes the largest single-minute value,
        'daily_total' the largest per-day total.
    mode: 'threshold' applies the tolerance band; 'quantile' falls back to
        tertiles of the entity's training values.
    """

    tolerance: float = 20.0
    peak_scope: str = "per_entity"
    peak_kind: str = "instant_max"
    mode: str = "threshold"

    def __post_init__(self) -> None:
        if not (0.0 < self.tolerance < 50.0):
            raise ValueError("tolerance must lie in (0, 50)")
        if self.peak_scope not in ("per_entity", "global"):
            raise ValueError(f"unknown peak_scope {self.peak_scope!r}")
        if self.peak_kind not in ("instant_max", "daily_total"):
            raise ValueError(f"unknown peak_kind {self.peak_kind!r}")
        if self.mode not in ("threshold", "quantile"):
            raise ValueError(f"unknown mode {self.mode!r}")


def scale_to_peak(value, peak: float):
    """Rescale so the training peak maps to 100; a zero peak maps everything to 0."""
    if peak <= 0:
        return np.zeros_like(np.asarray(value, dtype=np.float64)) if np.ndim(value) else 0.0
    return 100.0 * np.asarray(value, dtype=np.float64) / peak if np.ndim(value) else 100.0 * value / peak


def demand_level(scaled, tolerance: float = 20.0):
    """Class of a peak-scaled value: Low < 50-d <= Medium < 50+d <= High."""
    arr = np.asarray(scaled, dtype=np.float64)
    levels = np.where(arr < 50.0 - tolerance, 0, np.where(arr < 50.0 + tolerance, 1, 2))
    if np.ndim(scaled) == 0:
        return DemandLevel(int(levels))
    return levels.astype(np.int8)


def _daily_total_peak(values: np.ndarray, upto: int) -> float:
    full_days = upto // 1440
    if full_days == 0:
        return float(values[:upto].sum())
    totals = values[: full_days * 1440].reshape(full_days, 1440).sum(axis=1)
    tail = values[full_days * 1440 : upto].sum() if upto % 1440 else 0
    return float(max(totals.max(), tail))


def compute_peaks(panel: DemandPanel, split: SplitIndices, config: LabelConfig) -> np.ndarray:
    """Training-span peak per entity code (identical values under global scope)."""
    upto = split.train_end
    if config.peak_kind == "instant_max":
        peaks = np.array([float(s.values[:upto].max()) for s in panel.series])
    else:
        peaks = np.array([_daily_total_peak(s.values, upto) for s in panel.series])
    if config.peak_scope == "global":
        peaks = np.full_like(peaks, peaks.max())
    return peaks


def _quantile_cuts(train_values: np.ndarray) -> np.ndarray:
    return np.quantile(train_values.astype(np.float64), [1.0 / 3.0, 2.0 / 3.0])


def build_targets(
    panel: DemandPanel,
    split: SplitIndices,
    horizons: tuple[int, ...],
    config: LabelConfig | None = None,
) -> dict[int, dict[str, tuple[np.ndarray, np.ndarray]]]:
    """Per-horizon regression values and class labels for every entity.

    For each horizon H the returned arrays are aligned to forecast origins
    t = 0..length-1-H: entry t holds the raw demand at t+H and its class.
    """
    config = config or LabelConfig()
    length = panel.grid.length
    for h in horizons:
        if h < 1 or h >= length:
            raise HorizonExceedsGrid(f"horizon {h} exceeds grid of length {length}")
    peaks = compute_peaks(panel, split, config)
    out: dict[int, dict[str, tuple[np.ndarray, np.ndarray]]] = {}
    for h in horizons:
        per_entity: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        for series, peak in zip(panel.series, peaks):
            future = series.values[h:].astype(np.float64)
            if config.mode == "quantile":
                cuts = _quantile_cuts(series.values[: split.train_end])
                labels = np.searchsorted(cuts, future, side="right").astype(np.int8)
            else:
                labels = demand_level(scale_to_peak(future, peak), config.tolerance)
            per_entity[series.entity.name] = (future, labels)
        out[h] = per_entity
    return out
