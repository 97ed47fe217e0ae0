"""Demand panels: entities, one-minute time grids, and chronological splits.

A :class:`DemandPanel` is the common currency of the pipeline -- per-entity
demand counts on a shared, gap-free minute grid.  Panels are immutable after
construction and safe to read concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    EmptyInput,
    GridTooShort,
    UnknownEntity,
    UnparseableTimestamp,
)

STEP_MINUTES = 1
DEFAULT_RATIOS = (0.7, 0.2, 0.1)


@dataclass(frozen=True)
class EntityId:
    """A spatial entity (region or station) with its dense integer code."""

    name: str
    code: int


@dataclass(frozen=True)
class TimeGrid:
    """Regular minute grid: ``start`` (UTC, minute precision) plus ``length`` steps."""

    start: datetime
    length: int

    def __post_init__(self) -> None:
        if self.length < 1:
            raise ValueError("grid length must be >= 1")
        if self.start.second or self.start.microsecond:
            raise ValueError("grid start must have minute precision")
        if self.start.tzinfo is not None:
            raise ValueError("grid start must be a naive UTC timestamp")

    def time_at(self, step: int) -> datetime:
        return self.start + timedelta(minutes=int(step))

    def index_of(self, ts: datetime) -> int:
        return int((ts - self.start).total_seconds()) // 60

    def minutes_since_epoch(self) -> np.ndarray:
        """Absolute minute index of every step (minutes since 1970-01-01T00:00 UTC)."""
        epoch = datetime(1970, 1, 1)
        base = int((self.start - epoch).total_seconds()) // 60
        return base + np.arange(self.length, dtype=np.int64)


@dataclass(frozen=True)
class DemandSeries:
    """Non-negative demand counts for one entity, one value per grid step."""

    entity: EntityId
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.int64)
        if (v < 0).any():
            raise ValueError(f"negative demand for entity {self.entity.name!r}")
        object.__setattr__(self, "values", v)
        self.values.setflags(write=False)


class DemandPanel:
    """All entity series on one shared grid, codes dense 0..n_entities-1."""

    def __init__(self, grid: TimeGrid, series: Sequence[DemandSeries]):
        if not series:
            raise EmptyInput("panel needs at least one entity")
        codes = sorted(s.entity.code for s in series)
        if codes != list(range(len(series))):
            raise ValueError("entity codes must be dense 0..n-1 and unique")
        for s in series:
            if len(s.values) != grid.length:
                raise ValueError(
                    f"series {s.entity.name!r} length {len(s.values)} != grid {grid.length}"
                )
        self.grid = grid
        self.series = tuple(sorted(series, key=lambda s: s.entity.code))
        self._by_name = {s.entity.name: s for s in self.series}

    @classmethod
    def from_values(cls, grid: TimeGrid, values_by_name: Mapping[str, np.ndarray]) -> "DemandPanel":
        """Build a panel assigning codes by sorted entity name."""
        names = sorted(values_by_name)
        series = [
            DemandSeries(EntityId(name, code), np.asarray(values_by_name[name]))
            for code, name in enumerate(names)
        ]
        return cls(grid, series)

    @property
    def n_entities(self) -> int:
        return len(self.series)

    def entity_names(self) -> list[str]:
        return [s.entity.name for s in self.series]

    def by_name(self, name: str) -> DemandSeries:
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownEntity(f"unknown entity {name!r}") from None

    def values_matrix(self) -> np.ndarray:
        """(n_entities, grid.length) int64 view of all series."""
        return np.stack([s.values for s in self.series])

    def total(self) -> int:
        return int(sum(int(s.values.sum()) for s in self.series))


@dataclass(frozen=True)
class SplitIndices:
    """Chronological partition: train [0, train_end), valid [train_end, valid_end), test [valid_end, length)."""

    train_end: int
    valid_end: int
    length: int

    def __post_init__(self) -> None:
        if not (0 < self.train_end < self.valid_end < self.length):
            raise ValueError("split indices must satisfy 0 < train_end < valid_end < length")


def parse_timestamp(raw: str | datetime) -> datetime:
    """Parse an ISO-8601 timestamp, normalize to naive UTC, floor to the minute."""
    if isinstance(raw, datetime):
        ts = raw
    else:
        text = raw.strip().replace(" ", "T", 1)
        if text.endswith("Z"):
            text = text[:-1] + "+00:00"
        try:
            ts = datetime.fromisoformat(text)
        except ValueError as exc:
            raise UnparseableTimestamp(f"cannot parse timestamp {raw!r}") from exc
    if ts.tzinfo is not None:
        ts = ts.astimezone(timezone.utc).replace(tzinfo=None)
    return ts.replace(second=0, microsecond=0)


def floor_and_aggregate(
    records: Iterable[tuple[str, str | datetime, int]],
    forward_fill: bool = False,
) -> DemandPanel:
    """Aggregate (entity, timestamp, count) records into a minute panel.

    Timestamps are floored to the minute and counts summed per
    (entity, minute) pair.  The grid spans [min floored ts, max floored ts];
    minutes with no observation get demand 0 (or, with ``forward_fill``, the
    entity's last observed value).
    """
    counts: dict[tuple[str, datetime], int] = {}
    observed: set[tuple[str, datetime]] = set()
    lo: datetime | None = None
    hi: datetime | None = None
    for entity, raw_ts, count in records:
        ts = parse_timestamp(raw_ts)
        key = (str(entity), ts)
        counts[key] = counts.get(key, 0) + int(count)
        observed.add(key)
        lo = ts if lo is None or ts < lo else lo
        hi = ts if hi is None or ts > hi else hi
    if lo is None or hi is None:
        raise EmptyInput("no records to aggregate")

    length = int((hi - lo).total_seconds()) // 60 + 1
    grid = TimeGrid(lo, length)
    names = sorted({name for name, _ in counts})
    values: dict[str, np.ndarray] = {name: np.zeros(length, dtype=np.int64) for name in names}
    seen: dict[str, np.ndarray] = {name: np.zeros(length, dtype=bool) for name in names}
    for (name, ts), count in counts.items():
        idx = grid.index_of(ts)
        values[name][idx] = count
        seen[name][idx] = True
    if forward_fill:
        for name in names:
            vals, mask = values[name], seen[name]
            last = 0
            for i in range(length):
                if mask[i]:
                    last = vals[i]
                else:
                    vals[i] = last
    return DemandPanel.from_values(grid, values)


def chronological_split(
    length_or_panel: int | DemandPanel,
    ratios: tuple[float, float, float] = DEFAULT_RATIOS,
) -> SplitIndices:
    """Leak-free chronological split; floor on cumulative ratios, remainder to test."""
    length = (
        length_or_panel.grid.length
        if isinstance(length_or_panel, DemandPanel)
        else int(length_or_panel)
    )
    if any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be positive and sum to 1, got {ratios}")
    if length < 10:
        raise GridTooShort(f"grid length {length} < 10")
    # The epsilon absorbs float error in the cumulative ratios (0.7 + 0.2 is
    # slightly below 0.9 in binary), keeping the floor at its decimal value.
    train_end = int(np.floor(ratios[0] * length + 1e-6))
    valid_end = int(np.floor((ratios[0] + ratios[1]) * length + 1e-6))
    return SplitIndices(train_end=train_end, valid_end=valid_end, length=length)


def entity_peak(panel: DemandPanel, entity: str | EntityId, upto: int) -> int:
    """Maximum demand of one entity over steps [0, upto).

    Callers computing training-time statistics must pass ``upto`` no larger
    than the split's train_end so later spans cannot leak in.
    """
    name = entity.name if isinstance(entity, EntityId) else entity
    series = panel.by_name(name)
    if upto < 1:
        raise ValueError("upto must be >= 1")
    return int(series.values[:upto].max())
