import numpy as np
import pytest

from modeboost.core import chronological_split
from modeboost.errors import AlreadyScaled, DuplicateName, EmptyTraining, FeatureMismatch
from modeboost.features import FeatureConfig, assemble_matrix
from modeboost.postprocess import Scaler, encode_entities, fit_scaler, transform


@pytest.fixture(scope="module")
def matrix(small_synth_panel, small_split):
    return assemble_matrix(small_synth_panel, FeatureConfig(), (15,), split=small_split)


class TestFitScaler:
    def test_minmax_stores_training_extent(self, matrix):
        scaler = fit_scaler(matrix, "minmax")
        col = matrix.feature_names.index("demand")
        train = matrix.X[matrix.rows_train()][:, col]
        assert scaler.shift[col] == train.min()
        assert scaler.span[col] == train.max() - train.min()

    def test_pooled_across_entities(self, matrix):
        # A single scaler per feature: transformed magnitudes stay comparable.
        scaler = fit_scaler(matrix)
        scaled = transform(matrix, scaler)
        col = matrix.feature_names.index("demand")
        mean_by_entity_raw = [
            matrix.X[matrix.entity_codes == c, col].mean() for c in range(3)
        ]
        mean_by_entity_scaled = [
            scaled.X[scaled.entity_codes == c, col].mean() for c in range(3)
        ]
        assert np.argsort(mean_by_entity_raw).tolist() == np.argsort(mean_by_entity_scaled).tolist()

    def test_constant_feature_maps_to_zero(self, matrix):
        scaler = fit_scaler(matrix)
        scaled = transform(matrix, scaler)
        col = matrix.feature_names.index("month_of_year")
        # Categorical columns pass through; fabricate a constant numeric one instead.
        x = matrix.X.copy()
        demand_col = matrix.feature_names.index("demand")
        x[:, demand_col] = 42.0
        m2 = matrix.with_x(x, scaled=False)
        s2 = fit_scaler(m2)
        out = transform(m2, s2)
        assert np.allclose(out.X[:, demand_col], 0.0)
        assert scaled is not None and col >= 0

    def test_empty_training_raises(self, matrix):
        import dataclasses

        starved = dataclasses.replace(
            matrix, steps=matrix.steps + matrix.split.length, scaled=False
        )
        with pytest.raises(EmptyTraining):
            fit_scaler(starved)


class TestTransform:
    def test_minmax_arithmetic(self, matrix):
        scaler = fit_scaler(matrix)
        scaled = transform(matrix, scaler)
        col = matrix.feature_names.index("demand")
        lo, span = scaler.shift[col], scaler.span[col]
        expected = (matrix.X[0, col] - lo) / span
        assert scaled.X[0, col] == pytest.approx(expected, rel=1e-12)

    def test_monotone(self, matrix):
        scaler = fit_scaler(matrix)
        col = matrix.feature_names.index("roll_mean_60")
        raw = np.linspace(-10, 1000, 50)
        block = np.zeros((50, len(matrix.feature_names)))
        block[:, col] = raw
        out = scaler.transform_array(block)[:, col]
        assert np.all(np.diff(out) > 0)  # strict: no clipping, linear extrapolation

    def test_double_transform_guarded(self, matrix):
        scaler = fit_scaler(matrix)
        scaled = transform(matrix, scaler)
        with pytest.raises(AlreadyScaled):
            transform(scaled, scaler)

    def test_feature_mismatch(self, matrix):
        scaler = fit_scaler(matrix)
        import dataclasses

        renamed = dataclasses.replace(matrix, feature_names=["x"] * len(matrix.feature_names))
        with pytest.raises(FeatureMismatch):
            transform(renamed, scaler)

    def test_categoricals_pass_through(self, matrix):
        scaler = fit_scaler(matrix)
        scaled = transform(matrix, scaler)
        for name in ("entity_code", "hour_of_day", "day_of_week"):
            col = matrix.feature_names.index(name)
            assert np.array_equal(scaled.X[:, col], matrix.X[:, col])

    def test_round_trip_inverse(self, matrix):
        scaler = fit_scaler(matrix)
        out = scaler.transform_array(matrix.X)
        back = scaler.inverse_transform_array(out)
        np.testing.assert_allclose(back, matrix.X, atol=1e-12, rtol=1e-12)

    def test_zscore_mode(self, matrix):
        scaler = fit_scaler(matrix, "zscore")
        out = scaler.transform_array(matrix.X[matrix.rows_train()])
        col = matrix.feature_names.index("demand")
        assert abs(out[:, col].mean()) < 1e-9
        assert out[:, col].std() == pytest.approx(1.0, rel=1e-9)


class TestScalerPersistence:
    def test_bytes_round_trip(self, matrix):
        scaler = fit_scaler(matrix)
        back = Scaler.from_bytes(scaler.to_bytes())
        assert back.mode == scaler.mode
        assert back.feature_names == scaler.feature_names
        np.testing.assert_array_equal(back.shift, scaler.shift)
        np.testing.assert_array_equal(back.span, scaler.span)

    def test_fitted_on_train_only(self, small_synth_panel, matrix):
        # Perturb test-span rows: scaler bytes must be identical.
        x = matrix.X.copy()
        x[matrix.rows_test()] += 1234.5
        m2 = matrix.with_x(x, scaled=False)
        assert fit_scaler(m2).to_bytes() == fit_scaler(matrix).to_bytes()


class TestEncodeEntities:
    def test_sorted_order(self):
        assert encode_entities(["b", "a"]) == {"a": 0, "b": 1}

    def test_single(self):
        assert encode_entities(["only"]) == {"only": 0}

    def test_deterministic(self):
        names = ["zuid", "noord", "west"]
        assert encode_entities(names) == encode_entities(list(reversed(names)))

    def test_duplicate_rejected(self):
        with pytest.raises(DuplicateName):
            encode_entities(["a", "a"])
