"""Marginal model tests: mixture null, empirical CDF, p-values, table IO."""

import numpy as np
import pytest

from twostage_fdr import marginal as mg


class TestMixtureCdf:
    def test_standard_normal_center(self):
        assert mg.mixture_cdf(mg.STANDARD_NORMAL, 0.0) == pytest.approx(0.5, abs=1e-15)

    def test_real_data_null_at_zero(self):
        # 0.615*0.5 + 0.385*Phi(0.002/0.205), evaluated independently
        from scipy.special import ndtr
        expected = 0.615 * 0.5 + 0.385 * ndtr(0.002 / 0.205)
        got = mg.mixture_cdf(mg.REAL_DATA_NULL, 0.0)
        assert got == pytest.approx(expected, abs=1e-14)
        assert got == pytest.approx(0.50150, abs=5e-5)

    def test_limits(self):
        assert mg.mixture_cdf(mg.REAL_DATA_NULL, 1e9) == pytest.approx(1.0, abs=1e-15)
        assert mg.mixture_cdf(mg.REAL_DATA_NULL, -1e9) == pytest.approx(0.0, abs=1e-15)

    def test_nondecreasing_on_grid(self):
        grid = np.linspace(-3.0, 3.0, 10_000)
        vals = mg.mixture_cdf(mg.REAL_DATA_NULL, grid)
        assert np.all(np.diff(vals) >= 0.0)

    def test_mixture_validation(self):
        with pytest.raises(ValueError):
            mg.GaussianMixture((0.5, 0.6), (0.0, 0.0), (1.0, 1.0))
        with pytest.raises(ValueError):
            mg.GaussianMixture((1.0,), (0.0,), (0.0,))
        with pytest.raises(ValueError):
            mg.GaussianMixture((0.5, 0.5), (0.0,), (1.0, 1.0))


class TestMixtureQuantile:
    def test_symmetry(self):
        assert mg.mixture_quantile(mg.STANDARD_NORMAL, 0.5) == pytest.approx(0.0, abs=1e-10)

    def test_standard_normal_0975(self):
        assert mg.mixture_quantile(mg.STANDARD_NORMAL, 0.975) == pytest.approx(1.959964, abs=1e-6)

    def test_round_trip(self):
        rng = np.random.default_rng(1)
        q = rng.uniform(0.001, 0.999, 100)
        beta = mg.mixture_quantile(mg.REAL_DATA_NULL, q)
        np.testing.assert_allclose(mg.mixture_cdf(mg.REAL_DATA_NULL, beta), q, atol=1e-9)

    def test_domain(self):
        with pytest.raises(ValueError):
            mg.mixture_quantile(mg.STANDARD_NORMAL, 0.0)
        with pytest.raises(ValueError):
            mg.mixture_quantile(mg.STANDARD_NORMAL, 1.0)


class TestPValues:
    def test_center_gives_one(self):
        assert mg.p_two_sided(mg.STANDARD_NORMAL, 0.0) == pytest.approx(1.0, abs=1e-15)

    def test_quantile_example(self):
        assert mg.p_two_sided(mg.STANDARD_NORMAL, 1.959964) == pytest.approx(0.05, abs=1e-6)

    def test_tail_limit(self):
        assert mg.p_two_sided(mg.REAL_DATA_NULL, 1e9) == pytest.approx(0.0, abs=1e-12)
        assert mg.p_two_sided(mg.REAL_DATA_NULL, -1e9) == pytest.approx(0.0, abs=1e-12)

    def test_one_sided_variants(self):
        f = mg.mixture_cdf(mg.STANDARD_NORMAL, 0.7)
        assert mg.p_value(mg.STANDARD_NORMAL, 0.7, "left") == pytest.approx(f)
        assert mg.p_value(mg.STANDARD_NORMAL, 0.7, "right") == pytest.approx(1.0 - f)
        with pytest.raises(ValueError):
            mg.p_value(mg.STANDARD_NORMAL, 0.7, "both")

    def test_uniform_under_null_draws(self):
        # draws from the null mixture push p_two_sided to U(0,1)
        rng = np.random.default_rng(5)
        n = 100_000
        null = mg.REAL_DATA_NULL
        comp = rng.choice(len(null.weights), size=n, p=null.weights)
        beta = rng.normal(np.asarray(null.means)[comp], np.asarray(null.sds)[comp])
        p = mg.p_two_sided(null, beta)
        p_sorted = np.sort(p)
        i = np.arange(1, n + 1)
        ks = max(np.max(i / n - p_sorted), np.max(p_sorted - (i - 1) / n))
        assert ks < 1.63 / np.sqrt(n)


class TestEmpiricalCdf:
    def test_direct_count(self):
        cdf = mg.EmpiricalCdf(np.array([1.0, 2.0, 3.0, 4.0]))
        assert cdf(2.0) == pytest.approx(0.5)
        assert mg.empirical_p1(cdf, 2.0) == pytest.approx(0.5)

    def test_clamping(self):
        cdf = mg.EmpiricalCdf(np.array([1.0, 2.0, 3.0, 4.0]))
        assert mg.empirical_p1(cdf, 0.0) == pytest.approx(1.0 / 5.0)
        assert mg.empirical_p1(cdf, 4.0) == pytest.approx(4.0 / 5.0)
        assert cdf(0.0) == 0.0
        assert cdf(4.0) == 1.0

    def test_tie_handling_right_continuous(self):
        cdf = mg.EmpiricalCdf(np.array([1.0, 1.0, 2.0]))
        assert cdf(1.0) == pytest.approx(2.0 / 3.0)

    def test_rank_property(self):
        rng = np.random.default_rng(2)
        y = rng.normal(size=500)
        cdf = mg.EmpiricalCdf(y)
        ranks = np.sort(mg.empirical_p1(cdf, y))
        n = y.size
        expected = np.clip(np.arange(1, n + 1) / n, 1.0 / (n + 1), n / (n + 1.0))
        np.testing.assert_allclose(ranks, expected, atol=1e-12)


class TestBuildTable:
    def test_single_hypothesis(self):
        t = mg.build_table(["g1"], [0.0], [1.0], mg.STANDARD_NORMAL)
        assert t.p2[0] == pytest.approx(1.0)
        assert t.m == 1

    def test_rank_p1(self):
        t = mg.build_table(["a", "b", "c"], [0.0, 0.1, 0.2], [1.0, 2.0, 3.0],
                           mg.STANDARD_NORMAL)
        np.testing.assert_allclose(np.sort(t.p1), [1 / 3, 2 / 3, 3 / 4])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            mg.build_table(["a"], [0.0, 1.0], [1.0], mg.STANDARD_NORMAL)

    def test_duplicate_ids(self):
        with pytest.raises(ValueError):
            mg.build_table(["a", "a"], [0.0, 1.0], [1.0, 2.0], mg.STANDARD_NORMAL)

    def test_tsv_round_trip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(3)
        t = mg.build_table([f"g{i}" for i in range(50)], rng.normal(size=50),
                           rng.gamma(3.0, 0.25, size=50), mg.REAL_DATA_NULL)
        path = tmp_path / "table.tsv"
        mg.write_table_tsv(t, path)
        back = mg.read_table_tsv(path)
        assert back.ids == t.ids
        np.testing.assert_array_equal(back.beta_hat, t.beta_hat)
        np.testing.assert_array_equal(back.y, t.y)
        np.testing.assert_array_equal(back.p1, t.p1)
        np.testing.assert_array_equal(back.p2, t.p2)


class TestMixtureJson:
    def test_load_from_file(self, tmp_path):
        path = tmp_path / "null.json"
        path.write_text('{"weights": [0.615, 0.385], "means": [0.0, -0.002], "sds": [0.063, 0.205]}')
        m = mg.mixture_from_json(str(path))
        assert m == mg.REAL_DATA_NULL

    def test_unknown_keys_rejected(self):
        with pytest.raises(ValueError):
            mg.mixture_from_json({"weights": [1.0], "means": [0.0], "sds": [1.0], "shape": 2})
