import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from semstats.core import (
    DEFAULT_SCALE_FLOOR,
    DEFAULT_VAR_FLOOR,
    ClassStats,
    StandardizationParams,
    empirical_class_stats,
    zscore_apply,
    zscore_fit,
    zscore_invert,
)
from semstats.errors import DataError


class TestEmpiricalClassStats:
    def test_single_row_has_floored_variance(self):
        stats = empirical_class_stats([[1.0, 2.0]])
        assert_allclose(stats.mean, [1.0, 2.0])
        assert_allclose(stats.var_diag, [DEFAULT_VAR_FLOOR, DEFAULT_VAR_FLOOR])

    def test_symmetric_pair(self):
        stats = empirical_class_stats([[0.0, 0.0], [2.0, 2.0]])
        assert_allclose(stats.mean, [1.0, 1.0])
        assert_allclose(stats.var_diag, [1.0, 1.0])

    def test_monte_carlo_recovery(self):
        # oracle: the generator itself; the estimator must land within
        # 5 sigma / sqrt(n) of the generating parameters per coordinate
        rng = np.random.default_rng(7)
        mu_true = np.array([1.0, -2.0, 0.5])
        sigma_true = np.array([0.5, 2.0, 1.0])
        n = 1000
        rows = mu_true + sigma_true * rng.standard_normal((n, 3))
        stats = empirical_class_stats(rows)
        bound = 5.0 * sigma_true / np.sqrt(n)
        assert np.all(np.abs(stats.mean - mu_true) < bound)
        assert np.all(np.abs(stats.var_diag - sigma_true**2) < 5.0 * sigma_true**2 * np.sqrt(2.0 / n))

    def test_permutation_invariance(self):
        rng = np.random.default_rng(0)
        rows = rng.normal(size=(17, 5))
        a = empirical_class_stats(rows)
        b = empirical_class_stats(rows[rng.permutation(17)])
        assert_allclose(a.mean, b.mean, atol=1e-12)
        assert_allclose(a.var_diag, b.var_diag, atol=1e-12)

    def test_empty_matrix_rejected(self):
        with pytest.raises(DataError, match="empty class"):
            empirical_class_stats(np.empty((0, 3)))

    def test_nonfinite_rejected(self):
        with pytest.raises(DataError, match="invalid feature"):
            empirical_class_stats([[1.0, np.nan]])

    def test_var_floor_always_respected(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            rows = rng.normal(scale=1e-9, size=(4, 3))
            stats = empirical_class_stats(rows)
            assert np.all(stats.var_diag >= DEFAULT_VAR_FLOOR)


class TestZscore:
    def test_two_point_column(self):
        params = zscore_fit([[0.0], [2.0]])
        assert_allclose(params.center, [1.0])
        assert_allclose(params.scale, [1.0])

    def test_constant_column_floored(self):
        params = zscore_fit([[5.0], [5.0], [5.0]])
        assert_allclose(params.center, [5.0])
        assert_allclose(params.scale, [DEFAULT_SCALE_FLOOR])

    def test_single_row_rejected(self):
        with pytest.raises(DataError, match="insufficient rows"):
            zscore_fit([[1.0, 2.0]])

    def test_fit_apply_normalizes_columns(self):
        rng = np.random.default_rng(3)
        m = rng.normal(loc=3.0, scale=2.5, size=(50, 8))
        z = zscore_apply(zscore_fit(m), m)
        assert np.all(np.abs(z.mean(axis=0)) < 1e-9)
        assert np.all(np.abs(z.std(axis=0) - 1.0) < 1e-9)

    def test_apply_example(self):
        params = StandardizationParams(center=[1.0], scale=[2.0])
        assert_allclose(zscore_apply(params, [[3.0]]), [[1.0]])
        assert_allclose(zscore_invert(params, [[1.0]]), [[3.0]])

    def test_identity_params_are_noop(self):
        params = StandardizationParams(center=np.zeros(4), scale=np.ones(4))
        m = np.arange(12.0).reshape(3, 4)
        assert_allclose(zscore_apply(params, m), m)
        assert_allclose(zscore_invert(params, m), m)

    def test_round_trip(self):
        rng = np.random.default_rng(5)
        m = rng.normal(size=(20, 4)) * 7.0 + 3.0
        params = zscore_fit(m)
        back = zscore_invert(params, zscore_apply(params, m))
        assert_allclose(back, m, rtol=1e-10, atol=1e-10)

    def test_dimension_mismatch(self):
        params = zscore_fit(np.random.default_rng(0).normal(size=(4, 3)))
        with pytest.raises(DataError, match="dimension mismatch"):
            zscore_apply(params, np.zeros((2, 5)))
        with pytest.raises(DataError, match="dimension mismatch"):
            zscore_invert(params, np.zeros((2, 5)))

    def test_vector_input_supported(self):
        params = zscore_fit([[0.0, 0.0], [2.0, 4.0]])
        z = zscore_apply(params, np.array([2.0, 4.0]))
        assert z.shape == (2,)
        assert_allclose(zscore_invert(params, z), [2.0, 4.0], atol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(
            st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=3),
            min_size=2,
            max_size=30,
        )
    )
    def test_round_trip_property(self, rows):
        m = np.array(rows)
        params = zscore_fit(m)
        back = zscore_invert(params, zscore_apply(params, m))
        assert_allclose(back, m, rtol=1e-10, atol=1e-8)


class TestContainers:
    def test_class_stats_validates_lengths(self):
        with pytest.raises(DataError):
            ClassStats(mean=np.zeros(3), var_diag=np.ones(2))

    def test_class_stats_is_readonly(self):
        stats = ClassStats(mean=np.zeros(2), var_diag=np.ones(2))
        with pytest.raises(ValueError):
            stats.mean[0] = 1.0

    def test_standardization_rejects_nonpositive_scale(self):
        with pytest.raises(DataError):
            StandardizationParams(center=[0.0], scale=[0.0])
