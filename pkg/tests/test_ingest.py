from datetime import date, datetime

import numpy as np
import pytest

from modeboost.errors import (
    AllZeroTraining,
    EmptyInput,
    InvalidSpec,
    MalformedDate,
    MissingColumn,
)
from modeboost.geo import Region, RegionSet
from modeboost.ingest import (
    CleaningRules,
    SnapshotRecord,
    SynthSpec,
    assign_regions,
    clean_trips,
    generate_synthetic,
    load_holidays,
    parse_snapshots,
    read_demand_csv,
    synthetic_rates,
    trips_to_panel,
    write_demand_csv,
)

UNIT_SQUARE = (((0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0), (0.0, 0.0)),)


def _snapshot_csv(tmp_path, rows, header="timestamp,lat,lon,vehicle_type,operator"):
    path = tmp_path / "snaps.csv"
    path.write_text(header + "\n" + "\n".join(rows) + ("\n" if rows else ""))
    return path


class TestParseSnapshots:
    def test_valid_row_parses(self, tmp_path):
        path = _snapshot_csv(tmp_path, ["2021-01-04T12:00:30,51.9,4.4,e-bike,donkey"])
        records, report = parse_snapshots(path)
        assert len(records) == 1
        assert records[0].vehicle_type == "e-bike"
        assert records[0].timestamp == datetime(2021, 1, 4, 12, 0)
        assert report == {"rows": 1, "kept": 1, "skipped": 0}

    def test_row_missing_latitude_skipped_and_counted(self, tmp_path):
        path = _snapshot_csv(
            tmp_path,
            [
                "2021-01-04T12:00:30,,4.4,e-bike,donkey",
                "2021-01-04T12:01:30,51.9,4.4,bicycle,donkey",
            ],
        )
        records, report = parse_snapshots(path)
        assert len(records) == 1
        assert report["skipped"] == 1

    def test_empty_file_with_header(self, tmp_path):
        path = _snapshot_csv(tmp_path, [])
        records, report = parse_snapshots(path)
        assert records == [] and report["skipped"] == 0

    def test_missing_column_raises(self, tmp_path):
        path = _snapshot_csv(tmp_path, [], header="timestamp,lat,lon,operator")
        with pytest.raises(MissingColumn):
            parse_snapshots(path)

    def test_out_of_range_coordinates_skipped(self, tmp_path):
        path = _snapshot_csv(tmp_path, ["2021-01-04T12:00,99.0,4.4,e-bike,donkey"])
        records, report = parse_snapshots(path)
        assert records == [] and report["skipped"] == 1


class TestAssignRegions:
    def test_inside_point_assigned(self):
        rs = RegionSet([Region("zone", UNIT_SQUARE)])
        recs = [SnapshotRecord(datetime(2021, 1, 4, 12, 0), 5.0, 5.0, "e-bike", "op")]
        assigned, report = assign_regions(recs, rs)
        assert assigned == [("zone", datetime(2021, 1, 4, 12, 0), 1)]
        assert report["outside"] == 0

    def test_outside_point_dropped_and_counted(self):
        rs = RegionSet([Region("zone", UNIT_SQUARE)])
        recs = [SnapshotRecord(datetime(2021, 1, 4, 12, 0), 20.0, 20.0, "e-bike", "op")]
        assigned, report = assign_regions(recs, rs)
        assert assigned == [] and report["outside"] == 1

    def test_empty_region_set_raises(self):
        with pytest.raises(EmptyInput):
            assign_regions([], RegionSet([]))


def _trip(ride, start, end, s_from, s_to):
    return {
        "ride_id": ride,
        "start_time": start,
        "end_time": end,
        "start_station": s_from,
        "end_station": s_to,
    }


class TestCleanTrips:
    def test_over_24h_dropped(self):
        rows = [_trip("r1", "2021-01-04T10:00", "2021-01-05T11:00", "a", "b")]
        kept, report = clean_trips(rows)
        assert kept == [] and report["over_24h"] == 1

    def test_short_round_trip_dropped(self):
        rows = [_trip("r1", "2021-01-04T10:00:00", "2021-01-04T10:00:30", "a", "a")]
        kept, report = clean_trips(rows)
        assert kept == [] and report["short_round_trip"] == 1

    def test_long_round_trip_kept(self):
        rows = [_trip("r1", "2021-01-04T10:00:00", "2021-01-04T10:30:00", "a", "a")]
        kept, report = clean_trips(rows, CleaningRules(min_daily_starts=0.0))
        assert len(kept) == 1 and report["short_round_trip"] == 0

    def test_low_activity_station_dropped(self):
        # Station "slow" averages 2 starts/day over a 10-day span; "busy" has 4/day.
        rows = []
        for day in range(1, 11):
            for i in range(2):
                rows.append(_trip(f"s{day}-{i}", f"2021-01-{day:02d}T08:{i:02d}", f"2021-01-{day:02d}T08:30", "slow", "x"))
            for i in range(4):
                rows.append(_trip(f"b{day}-{i}", f"2021-01-{day:02d}T09:{i:02d}", f"2021-01-{day:02d}T09:30", "busy", "x"))
        kept, report = clean_trips(rows)
        assert report["low_activity_station"] == 20
        assert {t.start_station for t in kept} == {"busy"}

    def test_missing_field_dropped(self):
        rows = [_trip("r1", "2021-01-04T10:00", "2021-01-04T10:30", "", "b")]
        kept, report = clean_trips(rows)
        assert kept == [] and report["missing_field"] == 1

    def test_cleaning_is_idempotent(self):
        rows = []
        for day in range(1, 6):
            for i in range(5):
                rows.append(_trip(f"k{day}-{i}", f"2021-02-{day:02d}T07:{i:02d}", f"2021-02-{day:02d}T07:45", "hub", "x"))
        rows.append(_trip("bad", "2021-02-01T07:00", "2021-02-03T08:00", "hub", "x"))
        kept, _ = clean_trips(rows)
        again, report = clean_trips(
            [
                {
                    "ride_id": t.ride_id,
                    "start_time": t.start_time.isoformat(),
                    "end_time": t.end_time.isoformat(),
                    "start_station": t.start_station,
                    "end_station": t.end_station,
                }
                for t in kept
            ]
        )
        assert len(again) == len(kept)
        assert sum(v for k, v in report.items()) == 0


class TestTripsToPanel:
    def test_counts_and_conservation(self):
        rows = [
            _trip("r1", "2021-01-04T10:00:05", "2021-01-04T10:30", "s", "x"),
            _trip("r2", "2021-01-04T10:00:45", "2021-01-04T10:40", "s", "x"),
            _trip("r3", "2021-01-04T10:02:00", "2021-01-04T10:50", "s", "x"),
        ]
        kept, _ = clean_trips(rows, CleaningRules(min_daily_starts=0.0))
        panel = trips_to_panel(kept)
        values = panel.by_name("s").values
        assert values[0] == 2
        assert values[1] == 0
        assert panel.total() == len(kept)


class TestHolidays:
    def test_load_and_halo(self, tmp_path):
        path = tmp_path / "holidays.txt"
        path.write_text("2021-12-25\n2021-12-25\n\n2022-01-01\n")
        cal = load_holidays(path)
        assert len(cal.dates) == 2
        assert cal.is_holiday_period(date(2021, 12, 24))
        assert cal.is_holiday_period(date(2021, 12, 26))
        assert not cal.is_holiday_period(date(2021, 12, 23))

    def test_malformed_date(self, tmp_path):
        path = tmp_path / "holidays.txt"
        path.write_text("25-12-2021\n")
        with pytest.raises(MalformedDate):
            load_holidays(path)

    def test_empty_file_empty_calendar(self, tmp_path):
        path = tmp_path / "holidays.txt"
        path.write_text("")
        cal = load_holidays(path)
        assert not cal.is_holiday_period(date(2021, 12, 25))


class TestSyntheticGenerator:
    def test_noiseless_values_equal_rounded_rates(self):
        spec = SynthSpec(entities=2, days=2, noise=0.0, weekly_factor=0.3, seed=3)
        panel = generate_synthetic(spec)
        rates = synthetic_rates(spec)
        assert np.array_equal(panel.values_matrix(), np.rint(rates).astype(np.int64))

    def test_same_seed_identical(self):
        spec = SynthSpec(entities=2, days=2, seed=9)
        p1 = generate_synthetic(spec)
        p2 = generate_synthetic(spec)
        assert np.array_equal(p1.values_matrix(), p2.values_matrix())

    def test_different_seed_differs(self):
        p1 = generate_synthetic(SynthSpec(entities=2, days=2, seed=1))
        p2 = generate_synthetic(SynthSpec(entities=2, days=2, seed=2))
        assert not np.array_equal(p1.values_matrix(), p2.values_matrix())

    def test_bigger_base_means_bigger_mean(self):
        spec = SynthSpec(entities=2, days=3, amplitudes=(5.0, 5.0), bases=(100.0, 5.0), seed=4)
        panel = generate_synthetic(spec)
        means = panel.values_matrix().mean(axis=1)
        assert means[0] > means[1]

    def test_holiday_dip_lowers_that_day(self):
        spec = SynthSpec(
            entities=1, days=3, noise=0.0, weekly_factor=0.0,
            holiday_dates=(date(2021, 12, 7),), holiday_dip=0.5, seed=0,
        )
        values = generate_synthetic(spec).values_matrix()[0]
        day0 = values[:1440].sum()
        day1 = values[1440:2880].sum()
        assert day1 < 0.7 * day0

    def test_invalid_spec(self):
        with pytest.raises(InvalidSpec):
            generate_synthetic(SynthSpec(entities=0))
        with pytest.raises(InvalidSpec):
            generate_synthetic(SynthSpec(noise=2.0))


class TestDemandCsvRoundTrip:
    def test_round_trip(self, tmp_path, tiny_panel):
        path = tmp_path / "demand.csv"
        write_demand_csv(tiny_panel, path)
        back = read_demand_csv(path)
        assert back.entity_names() == tiny_panel.entity_names()
        assert np.array_equal(back.values_matrix(), tiny_panel.values_matrix())
        assert back.grid.start == tiny_panel.grid.start
