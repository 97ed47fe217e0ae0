"""File ingestion: vehicle snapshots, trip archives, holidays, and synthetic panels.

Raw inputs are cleaned and converted into :class:`~modeboost.core.DemandPanel`
objects.  The canonical aggregated interchange format is a CSV with header
``entity,timestamp,value`` at minute precision.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import DemandPanel, TimeGrid, floor_and_aggregate, parse_timestamp
from .errors import (
    EmptyInput,
    InvalidSpec,
    MalformedDate,
    MalformedRow,
    MissingColumn,
    UnparseableTimestamp,
)
from .geo import RegionSet
from .rng import CounterRng, derive_seed

VEHICLE_TYPES = ("bicycle", "e-bike", "e-scooter")

SNAPSHOT_COLUMNS = ("timestamp", "lat", "lon", "vehicle_type", "operator")
TRIP_COLUMNS = ("ride_id", "start_time", "end_time", "start_station", "end_station")


@dataclass(frozen=True)
class SnapshotRecord:
    timestamp: datetime
    lat: float
    lon: float
    vehicle_type: str
    operator: str
    entity: str | None = None


@dataclass(frozen=True)
class TripRecord:
    ride_id: str
    start_time: datetime
    end_time: datetime
    start_station: str
    end_station: str


@dataclass(frozen=True)
class HolidayCalendar:
    dates: frozenset[date]

    def __contains__(self, day: date) -> bool:
        return day in self.dates

    def is_holiday_period(self, day: date) -> bool:
        """1-day halo: the date itself or an adjacent calendar date."""
        return (
            day in self.dates
            or day - timedelta(days=1) in self.dates
            or day + timedelta(days=1) in self.dates
        )


# ---------------------------------------------------------------------------
# snapshots
# ---------------------------------------------------------------------------

def parse_snapshots(path: str | Path, strict: bool = False) -> tuple[list[SnapshotRecord], dict[str, int]]:
    """Read a snapshot CSV; invalid rows are skipped and counted.

    With ``strict=True`` the first bad row raises :class:`MalformedRow`
    instead of being counted.
    """
    records: list[SnapshotRecord] = []
    report = {"rows": 0, "kept": 0, "skipped": 0}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in SNAPSHOT_COLUMNS if c not in header]
        if missing:
            raise MissingColumn(f"snapshot file missing column(s): {', '.join(missing)}")
        has_entity = "entity" in header
        for line_no, row in enumerate(reader, start=2):
            report["rows"] += 1
            try:
                ts = parse_timestamp(row["timestamp"] or "")
                lat = float(row["lat"])
                lon = float(row["lon"])
                vt = (row["vehicle_type"] or "").strip()
                op = (row["operator"] or "").strip()
                if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
                    raise ValueError("coordinates out of range")
                if vt not in VEHICLE_TYPES:
                    raise ValueError(f"unknown vehicle type {vt!r}")
                if not op:
                    raise ValueError("missing operator")
            except (ValueError, TypeError, UnparseableTimestamp) as exc:
                if strict:
                    raise MalformedRow(f"line {line_no}: {exc}") from exc
                report["skipped"] += 1
                continue
            entity = (row.get("entity") or "").strip() or None if has_entity else None
            records.append(SnapshotRecord(ts, lat, lon, vt, op, entity))
            report["kept"] += 1
    return records, report


def assign_regions(
    records: Iterable[SnapshotRecord], regions: RegionSet
) -> tuple[list[tuple[str, datetime, int]], dict[str, int]]:
    """Map each snapshot to the first containing region.

    Records already carrying an entity name keep it; points outside every
    polygon are dropped and counted.  Each record contributes one unit to
    exactly one region.
    """
    if len(regions) == 0:
        raise EmptyInput("region set is empty")
    out: list[tuple[str, datetime, int]] = []
    report = {"assigned": 0, "outside": 0}
    for rec in records:
        name = rec.entity or regions.assign(rec.lon, rec.lat)
        if name is None:
            report["outside"] += 1
            continue
        out.append((name, rec.timestamp, 1))
        report["assigned"] += 1
    return out, report


def snapshots_to_panel(
    records: Iterable[SnapshotRecord], regions: RegionSet
) -> tuple[DemandPanel, dict[str, int]]:
    assigned, report = assign_regions(records, regions)
    if not assigned:
        raise EmptyInput("no snapshot fell inside any region")
    return floor_and_aggregate(assigned), report


# ---------------------------------------------------------------------------
# trips
# ---------------------------------------------------------------------------

@dataclass
class CleaningRules:
    max_duration_minutes: float = 24 * 60
    min_round_trip_seconds: float = 120.0
    min_daily_starts: float = 3.0


CLEANING_RULE_ORDER = (
    "missing_field",
    "invalid_time",
    "over_24h",
    "short_round_trip",
    "low_activity_station",
)


def parse_trips(path: str | Path) -> list[dict[str, str]]:
    """Read the raw trip CSV into row dicts; schema is validated here only."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in TRIP_COLUMNS if c not in header]
        if missing:
            raise MissingColumn(f"trip file missing column(s): {', '.join(missing)}")
        return list(reader)


def clean_trips(
    rows: Sequence[dict[str, str]], rules: CleaningRules | None = None
) -> tuple[list[TripRecord], dict[str, int]]:
    """Apply the trip cleaning rules in order and report per-rule removals.

    1. drop rows with any missing field;
    2. drop unparseable times and end < start;
    3. drop trips longer than 24 h;
    4. drop same-station round trips shorter than the configured minimum;
    5. drop every trip of stations averaging < 3 kept starts/day over the
       file's date span.

    Cleaning is total (never raises on data) and idempotent.
    """
    rules = rules or CleaningRules()
    report = {rule: 0 for rule in CLEANING_RULE_ORDER}
    kept: list[TripRecord] = []
    span_days: set[date] = set()

    for row in rows:
        fields = [row.get(c) or "" for c in TRIP_COLUMNS]
        if any(not f.strip() for f in fields):
            report["missing_field"] += 1
            continue
        try:
            start = parse_timestamp(fields[1])
            end = parse_timestamp(fields[2])
        except UnparseableTimestamp:
            report["invalid_time"] += 1
            continue
        span_days.add(start.date())
        if end < start:
            report["invalid_time"] += 1
            continue
        duration_min = (end - start).total_seconds() / 60.0
        if duration_min > rules.max_duration_minutes:
            report["over_24h"] += 1
            continue
        trip = TripRecord(fields[0].strip(), start, end, fields[3].strip(), fields[4].strip())
        if (
            trip.start_station == trip.end_station
            and (end - start).total_seconds() < rules.min_round_trip_seconds
        ):
            report["short_round_trip"] += 1
            continue
        kept.append(trip)

    if kept:
        first = min(t.start_time.date() for t in kept)
        last = max(t.start_time.date() for t in kept)
        n_days = (last - first).days + 1
        starts_per_station: dict[str, int] = {}
        for t in kept:
            starts_per_station[t.start_station] = starts_per_station.get(t.start_station, 0) + 1
        low = {s for s, n in starts_per_station.items() if n / n_days < rules.min_daily_starts}
        if low:
            filtered = [t for t in kept if t.start_station not in low]
            report["low_activity_station"] = len(kept) - len(filtered)
            kept = filtered
    return kept, report


def trips_to_panel(trips: Sequence[TripRecord]) -> DemandPanel:
    """Demand at (station, minute) = count of trip starts in that minute."""
    if not trips:
        raise EmptyInput("no trips to aggregate")
    records = [(t.start_station, t.start_time, 1) for t in trips]
    return floor_and_aggregate(records)


# ---------------------------------------------------------------------------
# holidays
# ---------------------------------------------------------------------------

def load_holidays(path: str | Path) -> HolidayCalendar:
    """One ISO date per line; blank lines ignored, duplicates collapse."""
    dates: set[date] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            try:
                dates.add(date.fromisoformat(text))
            except ValueError as exc:
                raise MalformedDate(f"line {line_no}: {text!r}") from exc
    return HolidayCalendar(frozenset(dates))


# ---------------------------------------------------------------------------
# synthetic panels
# ---------------------------------------------------------------------------

# Relative weekday demand shape, Monday..Sunday: commuting weekdays, a strong
# Friday, busy weekend leisure.
_WEEK_SHAPE = np.array([0.00, 0.05, 0.10, 0.15, 0.60, 1.00, 0.45])


@dataclass
class SynthSpec:
    """Parameters of the deterministic-seed synthetic demand generator.

    Per entity e the rate is

        lam_e(t) = (base_e + amp_e * max(0, sin(2*pi*minute_of_day/1440)))
                   * dow_factor(day) * holiday_factor(date)

    and values are ``round(lam + noise * (Poisson(lam) - lam))`` clipped at 0,
    so ``noise=0`` reproduces ``round(lam)`` exactly and ``noise=1`` is pure
    Poisson sampling.

    The dip multiplies every date within one day of a listed holiday (the
    whole holiday period dips, matching how such periods behave and how the
    holiday calendar feature flags them).
    """

    entities: int = 5
    days: int = 28
    amplitudes: Sequence[float] | float = 12.0
    bases: Sequence[float] | float | None = None
    weekly_factor: float = 0.5
    noise: float = 1.0
    holiday_dates: Sequence[date] = field(default_factory=tuple)
    holiday_dip: float = 0.45
    seed: int = 0
    start: datetime = datetime(2021, 12, 6)  # a Monday

    def validate(self) -> None:
        if self.entities < 1 or self.days < 1:
            raise InvalidSpec("entities and days must be >= 1")
        if not (0.0 <= self.noise <= 1.0):
            raise InvalidSpec("noise must lie in [0, 1]")
        if not (0.0 <= self.weekly_factor <= 1.0):
            raise InvalidSpec("weekly_factor must lie in [0, 1]")
        if not (0.0 < self.holiday_dip <= 1.0):
            raise InvalidSpec("holiday_dip must lie in (0, 1]")
        for amp in self._amplitudes():
            if amp < 0:
                raise InvalidSpec("amplitudes must be non-negative")
        if len(self._amplitudes()) != self.entities:
            raise InvalidSpec("need one amplitude per entity")
        if len(self._bases()) != self.entities:
            raise InvalidSpec("need one base per entity")

    def _amplitudes(self) -> list[float]:
        if isinstance(self.amplitudes, (int, float)):
            # Spread entities over a range so magnitudes differ.
            return [float(self.amplitudes) * (0.5 + 0.25 * e) for e in range(self.entities)]
        return [float(a) for a in self.amplitudes]

    def _bases(self) -> list[float]:
        if self.bases is None:
            return [1.0 + 0.15 * a for a in self._amplitudes()]
        if isinstance(self.bases, (int, float)):
            return [float(self.bases)] * self.entities
        return [float(b) for b in self.bases]


def synthetic_rates(spec: SynthSpec) -> np.ndarray:
    """(entities, steps) Poisson rates implied by the spec (no noise applied)."""
    spec.validate()
    steps = spec.days * 1440
    minute_of_day = np.arange(steps, dtype=np.float64) % 1440
    daily = np.maximum(0.0, np.sin(2.0 * np.pi * minute_of_day / 1440.0))

    start_dow = spec.start.weekday()
    day_index = np.arange(steps) // 1440
    dow = (start_dow + day_index) % 7
    dow_factor = 1.0 + spec.weekly_factor * _WEEK_SHAPE[dow]

    holiday_factor = np.ones(steps)
    if spec.holiday_dates:
        dipped: set[date] = set()
        for d in spec.holiday_dates:
            dipped.update((d + timedelta(days=k) for k in (-1, 0, 1)))
        for d in range(spec.days):
            if (spec.start + timedelta(days=d)).date() in dipped:
                holiday_factor[d * 1440 : (d + 1) * 1440] = spec.holiday_dip

    rates = np.empty((spec.entities, steps))
    for e, (base, amp) in enumerate(zip(spec._bases(), spec._amplitudes())):
        rates[e] = (base + amp * daily) * dow_factor * holiday_factor
    return rates


def generate_synthetic(spec: SynthSpec) -> DemandPanel:
    """Reproducible synthetic panel; same spec and seed give identical bits."""
    rates = synthetic_rates(spec)
    rng = CounterRng(derive_seed(spec.seed, "synthetic"))
    if spec.noise > 0.0:
        draws = rng.poisson(rates.ravel()).reshape(rates.shape).astype(np.float64)
        values = np.rint(rates + spec.noise * (draws - rates))
    else:
        values = np.rint(rates)
    values = np.maximum(values, 0.0).astype(np.int64)
    grid = TimeGrid(spec.start, rates.shape[1])
    names = [f"district_{chr(ord('a') + e % 26)}{e // 26 or ''}" for e in range(spec.entities)]
    return DemandPanel.from_values(grid, {n: values[e] for e, n in enumerate(names)})


# ---------------------------------------------------------------------------
# canonical aggregated CSV
# ---------------------------------------------------------------------------

def write_demand_csv(panel: DemandPanel, path: str | Path) -> None:
    """Write the canonical ``entity,timestamp,value`` format (minute ISO stamps)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["entity", "timestamp", "value"])
        for series in panel.series:
            name = series.entity.name
            for step, value in enumerate(series.values):
                ts = panel.grid.time_at(step).strftime("%Y-%m-%dT%H:%M")
                writer.writerow([name, ts, int(value)])


def read_demand_csv(path: str | Path) -> DemandPanel:
    """Read the canonical aggregated format back into a panel (gaps become 0)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in ("entity", "timestamp", "value") if c not in header]
        if missing:
            raise MissingColumn(f"demand file missing column(s): {', '.join(missing)}")
        records = []
        for line_no, row in enumerate(reader, start=2):
            try:
                value = int(row["value"])
            except (TypeError, ValueError) as exc:
                raise MalformedRow(f"line {line_no}: bad value {row.get('value')!r}") from exc
            records.append((row["entity"], row["timestamp"], value))
    return floor_and_aggregate(records)
