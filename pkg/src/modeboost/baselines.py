"""Benchmark forecasters: historical average, seasonal naive, SES, Croston.

Each baseline is fitted per entity and produces forecasts for arbitrary
origins t and horizons H using only values up to t (training statistics are
frozen at the split boundary).  Forecast paths are rolling-origin: smoothing
states keep updating as observations arrive through validation and test.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import lfilter

from .core import SplitIndices
from .errors import AllZeroTraining, InsufficientHistory

DAY_MINUTES = 1440
SES_ALPHA_GRID = np.round(np.arange(0.05, 0.951, 0.05), 2)


class HistoricalAverage:
    """Mean training demand of the target's (weekday, minute-of-day) slot.

    Slots never observed in training fall back to the global training mean.
    ``slotted=False`` degrades to the plain global-mean reading.
    """

    def __init__(self, slotted: bool = True, timezone_offset_minutes: int = 0):
        self.slotted = slotted
        self.tz = timezone_offset_minutes

    def fit(self, values: np.ndarray, split: SplitIndices, start_minute: int) -> "HistoricalAverage":
        self.start_minute = int(start_minute)
        train = np.asarray(values[: split.train_end], dtype=np.float64)
        self.global_mean = float(train.mean())
        local = self.start_minute + np.arange(split.train_end) + self.tz
        keys = ((local // DAY_MINUTES + 3) % 7) * DAY_MINUTES + local % DAY_MINUTES
        self.slot_sum = np.bincount(keys, weights=train, minlength=7 * DAY_MINUTES)
        self.slot_count = np.bincount(keys, minlength=7 * DAY_MINUTES)
        return self

    def forecast(self, origins: np.ndarray, horizon: int) -> np.ndarray:
        origins = np.asarray(origins, dtype=np.int64)
        if not self.slotted:
            return np.full(len(origins), self.global_mean)
        local = self.start_minute + origins + horizon + self.tz
        keys = ((local // DAY_MINUTES + 3) % 7) * DAY_MINUTES + local % DAY_MINUTES
        counts = self.slot_count[keys]
        with np.errstate(invalid="ignore", divide="ignore"):
            means = self.slot_sum[keys] / counts
        return np.where(counts > 0, means, self.global_mean)


class SeasonalNaive:
    """Forecast = the value one seasonal period before the target time."""

    def __init__(self, period: int = DAY_MINUTES):
        self.period = period

    def fit(self, values: np.ndarray, split: SplitIndices, start_minute: int = 0) -> "SeasonalNaive":
        self.values = np.asarray(values, dtype=np.float64)
        return self

    def forecast(self, origins: np.ndarray, horizon: int) -> np.ndarray:
        origins = np.asarray(origins, dtype=np.int64)
        ref = origins + horizon - self.period
        if (ref < 0).any():
            raise InsufficientHistory(
                f"seasonal naive needs one full period of history before the target"
            )
        if horizon > self.period:
            raise InsufficientHistory("horizon exceeds the seasonal period")
        return self.values[ref]


class SimpleExpSmoothing:
    """Flat forecast from the exponentially smoothed level.

    The level follows l_t = alpha * D_t + (1 - alpha) * l_{t-1}, seeded with
    the first training value.  When alpha is not given it is chosen from a
    0.05-step grid by minimizing the one-step squared error over training.
    """

    def __init__(self, alpha: float | None = None):
        if alpha is not None and not (0.0 < alpha <= 1.0):
            raise ValueError("alpha must lie in (0, 1]")
        self.alpha = alpha

    @staticmethod
    def _level_path(values: np.ndarray, alpha: float) -> np.ndarray:
        y, _ = lfilter([alpha], [1.0, -(1.0 - alpha)], values, zi=[(1.0 - alpha) * values[0]])
        return y

    def fit(self, values: np.ndarray, split: SplitIndices, start_minute: int = 0) -> "SimpleExpSmoothing":
        x = np.asarray(values, dtype=np.float64)
        if split.train_end < 2:
            raise InsufficientHistory("SES needs at least two training steps")
        if self.alpha is None:
            train = x[: split.train_end]
            best_alpha, best_sse = None, np.inf
            for alpha in SES_ALPHA_GRID:
                level = self._level_path(train, float(alpha))
                sse = float(((train[1:] - level[:-1]) ** 2).sum())
                if sse < best_sse:
                    best_alpha, best_sse = float(alpha), sse
            self.alpha = best_alpha
        self.level = self._level_path(x, self.alpha)
        return self

    def forecast(self, origins: np.ndarray, horizon: int) -> np.ndarray:
        return self.level[np.asarray(origins, dtype=np.int64)]


class Croston:
    """Intermittent-demand forecaster: smoothed size over smoothed interval.

    The size z and inter-demand interval p update only at steps with
    positive demand (z from the demand value, p from the gap q since the
    previous occurrence) and initialize from the first occurrence: z to its
    value, p to its 1-based index.  The forecast z/p stays constant between
    occurrences and is 0 before anything has been observed.
    """

    def __init__(self, alpha: float = 0.1):
        if not (0.0 < alpha <= 1.0):
            raise ValueError("alpha must lie in (0, 1]")
        self.alpha = alpha

    def fit(self, values: np.ndarray, split: SplitIndices, start_minute: int = 0) -> "Croston":
        x = np.asarray(values, dtype=np.float64)
        events = np.nonzero(x)[0]
        if events.size == 0 or events[0] >= split.train_end:
            raise AllZeroTraining("no positive demand in the training span")
        alpha = self.alpha
        sizes = x[events]
        z0 = float(sizes[0])
        p0 = float(events[0] + 1)
        if events.size > 1:
            gaps = np.diff(events).astype(np.float64)
            z_rest, _ = lfilter([alpha], [1.0, -(1.0 - alpha)], sizes[1:], zi=[(1.0 - alpha) * z0])
            p_rest, _ = lfilter([alpha], [1.0, -(1.0 - alpha)], gaps, zi=[(1.0 - alpha) * p0])
            z = np.concatenate(([z0], z_rest))
            p = np.concatenate(([p0], p_rest))
        else:
            z = np.array([z0])
            p = np.array([p0])
        self._events = events
        self._event_forecast = z / p
        self._n = len(x)
        return self

    def forecast(self, origins: np.ndarray, horizon: int) -> np.ndarray:
        origins = np.asarray(origins, dtype=np.int64)
        last_event = np.searchsorted(self._events, origins, side="right") - 1
        out = np.zeros(len(origins))
        seen = last_event >= 0
        out[seen] = self._event_forecast[last_event[seen]]
        return out


BASELINE_KINDS = ("ha", "snaive", "ses", "croston")


def make_baseline(
    kind: str,
    ses_alpha: float | None = None,
    croston_alpha: float = 0.1,
    seasonal_period: int = DAY_MINUTES,
    timezone_offset_minutes: int = 0,
    ha_slotted: bool = True,
):
    if kind == "ha":
        return HistoricalAverage(slotted=ha_slotted, timezone_offset_minutes=timezone_offset_minutes)
    if kind == "snaive":
        return SeasonalNaive(period=seasonal_period)
    if kind == "ses":
        return SimpleExpSmoothing(alpha=ses_alpha)
    if kind == "croston":
        return Croston(alpha=croston_alpha)
    raise ValueError(f"unknown baseline {kind!r}; expected one of {BASELINE_KINDS}")
