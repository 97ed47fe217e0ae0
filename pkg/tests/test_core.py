from datetime import datetime

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modeboost.core import (
    DemandPanel,
    TimeGrid,
    chronological_split,
    entity_peak,
    floor_and_aggregate,
    parse_timestamp,
)
from modeboost.errors import EmptyInput, GridTooShort, UnknownEntity, UnparseableTimestamp


class TestFloorAndAggregate:
    def test_counts_within_same_minute_add_up(self):
        panel = floor_and_aggregate(
            [
                ("centrum", "2021-01-04T12:00:10", 1),
                ("centrum", "2021-01-04T12:00:55", 1),
            ]
        )
        assert panel.by_name("centrum").values[0] == 2

    def test_unobserved_minutes_inside_span_become_zero(self):
        panel = floor_and_aggregate(
            [
                ("centrum", "2021-01-04T12:00", 3),
                ("centrum", "2021-01-04T12:02", 4),
            ]
        )
        # Dictionary-aggregation oracle: only observed minutes carry counts.
        expected = {0: 3, 1: 0, 2: 4}
        for idx, value in expected.items():
            assert panel.by_name("centrum").values[idx] == value

    def test_entities_aggregate_independently(self):
        panel = floor_and_aggregate(
            [
                ("a", "2021-01-04T12:00", 5),
                ("b", "2021-01-04T12:00", 7),
            ]
        )
        assert panel.by_name("a").values[0] == 5
        assert panel.by_name("b").values[0] == 7

    def test_permutation_invariance(self):
        records = [
            ("a", "2021-01-04T12:00:30", 1),
            ("b", "2021-01-04T12:01:10", 2),
            ("a", "2021-01-04T12:03:05", 1),
            ("a", "2021-01-04T12:00:40", 4),
        ]
        p1 = floor_and_aggregate(records)
        p2 = floor_and_aggregate(list(reversed(records)))
        for name in p1.entity_names():
            assert np.array_equal(p1.by_name(name).values, p2.by_name(name).values)

    def test_total_conservation(self):
        records = [("a", f"2021-01-04T12:{m:02d}", c) for m, c in [(0, 3), (5, 2), (9, 7)]]
        panel = floor_and_aggregate(records)
        assert panel.total() == 12

    def test_empty_input_raises(self):
        with pytest.raises(EmptyInput):
            floor_and_aggregate([])

    def test_bad_timestamp_raises(self):
        with pytest.raises(UnparseableTimestamp):
            floor_and_aggregate([("a", "not-a-time", 1)])

    def test_forward_fill_gap_policy(self):
        panel = floor_and_aggregate(
            [("a", "2021-01-04T12:00", 3), ("a", "2021-01-04T12:03", 1)],
            forward_fill=True,
        )
        assert panel.by_name("a").values.tolist() == [3, 3, 3, 1]


class TestTimestampParsing:
    def test_timezone_normalized_to_utc(self):
        assert parse_timestamp("2021-01-04T13:30:00+01:00") == datetime(2021, 1, 4, 12, 30)

    def test_z_suffix(self):
        assert parse_timestamp("2021-06-01T00:10:59Z") == datetime(2021, 6, 1, 0, 10)

    def test_space_separator(self):
        assert parse_timestamp("2021-06-01 08:05:30") == datetime(2021, 6, 1, 8, 5)


class TestChronologicalSplit:
    def test_length_100(self):
        s = chronological_split(100)
        assert (s.train_end, s.valid_end) == (70, 90)

    def test_length_10(self):
        s = chronological_split(10)
        assert (s.train_end, s.valid_end) == (7, 9)

    def test_too_short(self):
        with pytest.raises(GridTooShort):
            chronological_split(9)

    def test_partitions_disjoint_ordered_cover(self):
        s = chronological_split(1237)
        train = set(range(0, s.train_end))
        valid = set(range(s.train_end, s.valid_end))
        test = set(range(s.valid_end, s.length))
        assert train | valid | test == set(range(1237))
        assert not (train & valid) and not (valid & test)
        assert max(train) < min(valid) < max(valid) < min(test)

    @given(st.integers(min_value=10, max_value=100_000))
    @settings(max_examples=200, deadline=None)
    def test_ratio_within_one_step(self, length):
        s = chronological_split(length)
        assert abs(s.train_end - 0.7 * length) <= 1.0
        assert abs(s.valid_end - 0.9 * length) <= 1.0


class TestEntityPeak:
    def test_linear_scan(self, tiny_panel):
        values = tiny_panel.by_name("centrum").values
        assert entity_peak(tiny_panel, "centrum", 21) == max(values[:21])

    def test_all_zero_series(self):
        grid = TimeGrid(datetime(2021, 1, 4), 12)
        panel = DemandPanel.from_values(grid, {"quiet": np.zeros(12, dtype=int)})
        assert entity_peak(panel, "quiet", 10) == 0

    def test_single_element(self, tiny_panel):
        assert entity_peak(tiny_panel, "haven", 1) == tiny_panel.by_name("haven").values[0]

    def test_unknown_entity(self, tiny_panel):
        with pytest.raises(UnknownEntity):
            entity_peak(tiny_panel, "nowhere", 5)


class TestPanelInvariants:
    def test_codes_follow_sorted_names(self, tiny_panel):
        names = tiny_panel.entity_names()
        assert names == sorted(names)
        assert [s.entity.code for s in tiny_panel.series] == [0, 1]

    def test_values_are_read_only(self, tiny_panel):
        with pytest.raises(ValueError):
            tiny_panel.by_name("centrum").values[0] = 99
