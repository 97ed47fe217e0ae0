from datetime import date, datetime

import numpy as np
import pytest

from modeboost.core import DemandPanel, SplitIndices, TimeGrid, chronological_split
from modeboost.errors import InsufficientHistory, NoUsableRows
from modeboost.features import (
    FeatureConfig,
    adjusted_demand,
    assemble_matrix,
    calendar_features,
    ewma_features,
    fourier_coefficients,
    fourier_columns,
    fourier_reconstruction,
    fourier_static_columns,
    lag_features,
    rolling_cv,
    rolling_features,
    training_quantile_cuts,
)
from modeboost.ingest import HolidayCalendar

from oracles import ewma_closed_form, fourier_direct, naive_cv, naive_rolling_max, naive_rolling_mean

RNG = np.random.default_rng(123)


class TestLags:
    def test_shift_definition(self):
        cols = lag_features(np.array([4.0, 7.0, 9.0]), [1])
        col = cols["lag_1"]
        assert col.first_valid == 1
        assert col.values[1] == 4.0 and col.values[2] == 7.0

    def test_day_lag_warmup(self):
        x = RNG.poisson(5, 2 * 1440).astype(float)
        col = lag_features(x, [1440])["lag_1440"]
        assert col.first_valid == 1440
        assert np.array_equal(col.values[1440:], x[:-1440])

    def test_lag_zero_rejected_by_config(self):
        with pytest.raises(ValueError):
            FeatureConfig(lag_offsets=(0, 1))


class TestRolling:
    def test_window_five_example(self):
        x = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        cols = rolling_features(x, [5])
        assert cols["roll_mean_5"].values[4] == pytest.approx(3.0)
        assert cols["roll_max_5"].values[4] == 5.0

    def test_constant_series(self):
        x = np.full(50, 7.0)
        cols = rolling_features(x, [10])
        assert np.allclose(cols["roll_mean_10"].values, 7.0)
        assert np.allclose(cols["roll_max_10"].values, 7.0)

    def test_prefix_policy_first_step(self):
        x = np.array([9.0, 1.0, 1.0])
        cols = rolling_features(x, [60])
        assert cols["roll_mean_60"].values[0] == 9.0
        assert cols["roll_max_60"].values[0] == 9.0

    def test_matches_naive_loops(self):
        x = RNG.poisson(8, 300).astype(float)
        for w in (5, 10, 60):
            cols = rolling_features(x, [w])
            np.testing.assert_allclose(cols[f"roll_mean_{w}"].values, naive_rolling_mean(x, w), rtol=1e-9)
            np.testing.assert_allclose(cols[f"roll_max_{w}"].values, naive_rolling_max(x, w), rtol=0)


class TestEwma:
    def test_alpha_from_span(self):
        # span 5 -> alpha 1/3: [1, 2] gives [1, 4/3]
        col = ewma_features(np.array([1.0, 2.0]), [5])["ewma_5"]
        np.testing.assert_allclose(col.values, [1.0, 4.0 / 3.0], rtol=1e-12)

    def test_constant_fixed_point(self):
        col = ewma_features(np.full(40, 3.5), [10])["ewma_10"]
        np.testing.assert_allclose(col.values, 3.5, rtol=1e-12)

    def test_matches_closed_form(self):
        x = RNG.poisson(6, 200).astype(float)
        for span in (5, 10, 60):
            col = ewma_features(x, [span])[f"ewma_{span}"]
            for t in (0, 1, 7, 50, 199):
                assert col.values[t] == pytest.approx(ewma_closed_form(x, span, t), rel=1e-9)


class TestRollingCv:
    def test_constant_window_zero(self):
        col = rolling_cv(np.full(30, 4.0), [10])["cv_10"]
        assert np.allclose(col.values, 0.0)

    def test_zero_mean_policy(self):
        col = rolling_cv(np.zeros(30), [10])["cv_10"]
        assert np.allclose(col.values, 0.0)

    def test_two_point_window(self):
        col = rolling_cv(np.array([2.0, 4.0]), [2])["cv_2"]
        assert col.values[1] == pytest.approx(np.sqrt(2.0) / 3.0, rel=1e-9)

    def test_matches_direct_sigma_over_mu(self):
        x = RNG.poisson(10, 400).astype(float)
        col = rolling_cv(x, [60])["cv_60"]
        for t in (0, 1, 30, 59, 60, 150, 399):
            assert col.values[t] == pytest.approx(naive_cv(x, 60, t), rel=1e-9, abs=1e-12)


class TestFourier:
    def test_constant_series_zero_coefficients(self):
        coeffs = fourier_coefficients(np.full(100, 5.0), 20, 3, 100)
        for k in range(1, 4):
            assert coeffs[f"a_{k}"] == pytest.approx(0.0, abs=1e-9)
            assert coeffs[f"b_{k}"] == pytest.approx(0.0, abs=1e-9)

    def test_pure_cosine_window(self):
        # Window [0, -1, 0, 1] equals cos(2*pi*j/4) for j = 1..4.
        coeffs = fourier_coefficients(np.array([0.0, -1.0, 0.0, 1.0]), 4, 1, 4)
        assert coeffs["a_1"] == pytest.approx(1.0, abs=1e-12)
        assert coeffs["b_1"] == pytest.approx(0.0, abs=1e-12)

    def test_cosine_amplitude_recovered(self):
        for period in (12, 60, 480):
            t = np.arange(1, 3 * period + 1)
            x = 4.25 * np.cos(2 * np.pi * t / period)
            coeffs = fourier_coefficients(x, period, 2, 3 * period)
            assert coeffs["a_1"] == pytest.approx(4.25, abs=1e-9)

    def test_insufficient_history(self):
        with pytest.raises(InsufficientHistory):
            fourier_coefficients(np.ones(10), 20, 1, 10)

    def test_reconstruction_examples(self):
        assert fourier_reconstruction({"a_1": 0.0, "b_1": 0.0}, 3, 4) == 0.0
        assert fourier_reconstruction({"a_1": 1.0, "b_1": 0.0}, 4, 4) == pytest.approx(1.0)

    def test_reconstruction_reproduces_pure_harmonic(self):
        period = 24
        t = np.arange(1, 5 * period + 1)
        x = 2.0 * np.cos(2 * np.pi * 2 * t / period) + 0.5 * np.sin(2 * np.pi * t / period)
        coeffs = fourier_coefficients(x, period, 3, 2 * period)
        for step in range(period):
            expected = 2.0 * np.cos(2 * np.pi * 2 * step / period) + 0.5 * np.sin(
                2 * np.pi * step / period
            )
            assert fourier_reconstruction(coeffs, step, period) == pytest.approx(expected, abs=1e-9)

    def test_columns_match_direct_summation(self):
        x = RNG.poisson(9, 700).astype(float)
        period, harmonics = 120, 3
        cols = fourier_columns(x, period, harmonics)
        assert cols["fourier_a_1"].first_valid == period - 1
        for end in (period, period + 7, 400, 700):
            t = end - 1
            for k in (1, 2, 3):
                a, b = fourier_direct(x, period, k, end)
                assert cols[f"fourier_a_{k}"].values[t] == pytest.approx(a, rel=1e-9, abs=1e-9)
                assert cols[f"fourier_b_{k}"].values[t] == pytest.approx(b, rel=1e-9, abs=1e-9)

    def test_recon_column_is_sum_of_cosine_coefficients(self):
        x = RNG.poisson(4, 300).astype(float)
        cols = fourier_columns(x, 60, 2)
        t = 200
        expected = cols["fourier_a_1"].values[t] + cols["fourier_a_2"].values[t]
        assert cols["fourier_recon"].values[t] == pytest.approx(expected, rel=1e-12)

    def test_static_mode_constant_columns(self):
        x = RNG.poisson(4, 300).astype(float)
        cols = fourier_static_columns(x, 60, 2, train_end=210)
        assert np.unique(cols["fourier_a_1"].values).size == 1
        direct_a, _ = fourier_direct(x, 60, 1, 210)
        assert cols["fourier_a_1"].values[0] == pytest.approx(direct_a, rel=1e-9)


class TestAdjustedDemand:
    def test_tertile_multipliers(self):
        cuts = np.array([10.0, 20.0])
        col = adjusted_demand(np.array([15.0, 25.0, 8.0]), cuts, scale=2.0)
        np.testing.assert_allclose(col.values, [15.0, 50.0, 4.0])

    def test_five_levels_use_higher_powers(self):
        cuts = np.array([10.0, 20.0, 30.0, 40.0])
        col = adjusted_demand(np.array([50.0, 5.0]), cuts, scale=2.0)
        assert col.values[0] == pytest.approx(200.0)  # extreme high: x4
        assert col.values[1] == pytest.approx(1.25)  # extreme low: /4

    def test_degenerate_training_multiplier_one(self):
        cuts = training_quantile_cuts(np.full(50, 3.0), 3)
        assert cuts is None
        col = adjusted_demand(np.array([1.0, 3.0, 9.0]), cuts)
        np.testing.assert_allclose(col.values, [1.0, 3.0, 9.0])

    def test_order_preserving(self):
        train = RNG.poisson(12, 500).astype(float)
        cuts = training_quantile_cuts(train, 3)
        x = np.sort(RNG.poisson(12, 200).astype(float))
        col = adjusted_demand(x, cuts, scale=2.0, direction="monotone")
        assert np.all(np.diff(col.values) >= 0)

    def test_compress_direction_flag(self):
        cuts = np.array([10.0, 20.0])
        col = adjusted_demand(np.array([25.0]), cuts, scale=2.0, direction="compress")
        assert col.values[0] == pytest.approx(12.5)


class TestCalendar:
    def _minutes(self, ts: datetime, n: int) -> np.ndarray:
        base = int((ts - datetime(1970, 1, 1)).total_seconds()) // 60
        return base + np.arange(n, dtype=np.int64)

    def test_monday_morning_decomposition(self):
        cols = calendar_features(self._minutes(datetime(2021, 1, 4, 9, 30), 1))
        assert cols["day_of_week"].values[0] == 0  # Monday
        assert cols["hour_of_day"].values[0] == 9
        assert cols["minute_of_hour"].values[0] == 30
        assert cols["month_of_year"].values[0] == 0  # January
        assert cols["quarter_of_year"].values[0] == 1  # winter

    def test_holiday_halo(self):
        cal = HolidayCalendar(frozenset({date(2021, 12, 25)}))
        minutes = self._minutes(datetime(2021, 12, 23, 0, 0), 5 * 1440)
        col = calendar_features(minutes, 0, cal)["is_holiday_period"]
        by_day = col.values.reshape(5, 1440)
        flags = [row.max() for row in by_day]
        assert flags == [0.0, 1.0, 1.0, 1.0, 0.0]  # 23rd no, 24th-26th yes, 27th no
        assert all(row.min() == row.max() for row in by_day)  # constant within a day

    def test_meteorological_quarters(self):
        expectations = {
            datetime(2021, 6, 15): 3,
            datetime(2021, 12, 15): 1,
            datetime(2021, 3, 1): 2,
            datetime(2021, 9, 30): 4,
        }
        for ts, quarter in expectations.items():
            cols = calendar_features(self._minutes(ts, 1))
            assert cols["quarter_of_year"].values[0] == quarter

    def test_timezone_offset_shifts_local_time(self):
        minutes = self._minutes(datetime(2021, 1, 4, 23, 30), 1)
        cols = calendar_features(minutes, timezone_offset_minutes=60)
        assert cols["hour_of_day"].values[0] == 0
        assert cols["day_of_week"].values[0] == 1  # local Tuesday


class TestAssembleMatrix:
    def test_target_column_count(self, small_synth_panel, small_split):
        m = assemble_matrix(
            small_synth_panel, FeatureConfig(), (5, 15, 30, 60), split=small_split
        )
        assert len(m.y_reg) == 4 and len(m.y_cls) == 4

    def test_entity_independence(self, small_synth_panel, small_split):
        m = assemble_matrix(small_synth_panel, FeatureConfig(), (15,), split=small_split)
        sub_panel = DemandPanel.from_values(
            small_synth_panel.grid,
            {
                small_synth_panel.entity_names()[0]: small_synth_panel.series[0].values,
                small_synth_panel.entity_names()[1]: small_synth_panel.series[1].values,
            },
        )
        m2 = assemble_matrix(sub_panel, FeatureConfig(), (15,), split=small_split)
        sel = m.entity_codes == 0
        cols = [i for i, n in enumerate(m.feature_names) if n != "entity_code"]
        np.testing.assert_array_equal(m.X[sel][:, cols], m2.X[m2.entity_codes == 0][:, cols])

    def test_disabling_families_leaves_core_columns(self, small_synth_panel, small_split):
        config = FeatureConfig(
            include_lags=False,
            include_rolling=False,
            include_ewma=False,
            include_adjusted=False,
            include_cv=False,
            include_fourier=False,
        )
        m = assemble_matrix(small_synth_panel, config, (15,), split=small_split)
        assert m.feature_names == [
            "entity_code",
            "demand",
            "minute_of_hour",
            "hour_of_day",
            "day_of_week",
            "month_of_year",
            "quarter_of_year",
            "is_holiday_period",
        ]

    def test_warmup_exclusion_count(self, small_synth_panel, small_split):
        config = FeatureConfig()
        m = assemble_matrix(small_synth_panel, config, (15,), split=small_split)
        expected_warmup = max(
            max(config.lag_offsets),
            max(config.rolling_windows) - 1,
            max(config.cv_windows) - 1,
            config.fourier_period - 1,
        )
        n = small_synth_panel.grid.length
        for code in range(small_synth_panel.n_entities):
            steps = m.steps[m.entity_codes == code]
            assert steps.min() == expected_warmup
            assert len(steps) == n - expected_warmup - 15

    def test_causality_appending_future_does_not_change_rows(self, small_synth_panel):
        full = small_synth_panel
        n_short = 3 * 1440
        short_panel = DemandPanel.from_values(
            TimeGrid(full.grid.start, n_short),
            {s.entity.name: s.values[:n_short] for s in full.series},
        )
        split = SplitIndices(train_end=2000, valid_end=2500, length=n_short)
        config = FeatureConfig()
        m_short = assemble_matrix(short_panel, config, (15,), split=split)
        m_full = assemble_matrix(full, config, (15,), split=split)
        common = np.isin(m_full.steps, m_short.steps) & (
            m_full.steps <= m_short.steps.max()
        )
        for code in range(full.n_entities):
            a = m_short.X[m_short.entity_codes == code]
            b = m_full.X[common & (m_full.entity_codes == code)][: len(a)]
            assert np.array_equal(a, b), "features changed when future data was appended"

    def test_no_usable_rows(self):
        grid = TimeGrid(datetime(2021, 1, 4), 100)
        panel = DemandPanel.from_values(grid, {"a": np.ones(100, dtype=int)})
        with pytest.raises(NoUsableRows):
            assemble_matrix(
                panel, FeatureConfig(), (15,), split=SplitIndices(70, 90, 100)
            )
