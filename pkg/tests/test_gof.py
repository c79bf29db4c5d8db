import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from typik import gof
from typik.dist import RngStream
from typik.errors import DomainError
from typik.gof import PValueMethod

from . import oracles


class TestPit:
    def test_examples(self):
        assert gof.pit([0.0], stats.norm.cdf)[0] == 0.5
        x = np.sort(np.random.default_rng(0).normal(size=30))
        assert np.all(np.diff(gof.pit(x, stats.norm.cdf)) >= 0)

    def test_uniform_mean(self):
        x = RngStream(1).normal(10**4)
        assert abs(gof.pit(x, stats.norm.cdf).mean() - 0.5) < 0.01

    def test_nonfinite(self):
        with pytest.raises(DomainError):
            gof.pit([0.0, np.nan], stats.norm.cdf)


class TestKsStatistic:
    def test_examples(self):
        assert gof.ks_statistic([0.5]) == 0.5
        assert gof.ks_statistic([0.25, 0.75]) == 0.25
        n = 37
        assert gof.ks_statistic(np.arange(1, n + 1) / (n + 1)) == pytest.approx(1 / (n + 1), rel=1e-12)

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=40))
    def test_matches_brute_force(self, u):
        assert gof.ks_statistic(u) == pytest.approx(oracles.ks_brute(u), abs=1e-9)

    def test_order_invariant(self, rng):
        u = rng.uniform(size=25)
        assert gof.ks_statistic(u) == gof.ks_statistic(u[::-1])

    def test_errors(self):
        with pytest.raises(DomainError):
            gof.ks_statistic([])
        with pytest.raises(DomainError):
            gof.ks_statistic([0.5, 1.2])


class TestKsPvalue:
    def test_closed_forms(self):
        assert gof.ks_pvalue(0.75, 1).value == pytest.approx(0.5, abs=1e-14)
        assert gof.ks_pvalue(0.5, 1).value == 1.0
        assert gof.ks_pvalue(1.0, 5).value == gof.PVALUE_FLOOR

    @pytest.mark.parametrize("key", sorted(oracles.KS_EXACT))
    def test_exact_rational(self, key):
        n, d = key
        p = gof.ks_pvalue(d, n)
        assert p.method is PValueMethod.KS_EXACT
        assert p.value == pytest.approx(oracles.KS_EXACT[key], rel=1e-10)

    def test_rational_oracle_on_small_n(self):
        for n, d in [(3, Fraction(2, 5)), (7, Fraction(1, 4)), (12, Fraction(3, 10))]:
            assert gof.ks_pvalue(float(d), n).value == pytest.approx(oracles.ks_exact_rational(n, d), rel=1e-12)

    @pytest.mark.parametrize("n", [2, 5, 20, 50, 100, 140])
    def test_against_scipy(self, n):
        d = np.linspace(0.5 / n + 1e-9, 0.999, 150)
        ours = gof.ks_sf(d, n)
        ref = np.maximum(oracles.ks_sf_scipy(d, n), gof.PVALUE_FLOOR)
        assert np.allclose(ours, ref, rtol=1e-6, atol=1e-300)

    def test_asymptotic_branch(self):
        n = 10**4
        p = gof.ks_pvalue(1.3581 / math.sqrt(n), n)
        assert p.method is PValueMethod.KS_ASYMPTOTIC
        assert p.value == pytest.approx(oracles.KOLMOGOROV_SF_1_3581, abs=1e-12)
        assert abs(p.value - 0.05) < 5e-4
        small_t = gof.ks_pvalue(0.5 / math.sqrt(n), n).value
        assert small_t == pytest.approx(stats.kstwobign.sf(0.5), rel=1e-12)

    def test_nonincreasing_in_d(self):
        for n in (3, 17, 100, 500):
            p = gof.ks_sf(np.linspace(0, 1, 400), n)
            assert np.all(np.diff(p) <= 1e-15)

    def test_range_and_errors(self):
        with pytest.raises(DomainError):
            gof.ks_pvalue(1.5, 10)
        with pytest.raises(DomainError):
            gof.ks_pvalue(0.1, 0)

    @pytest.mark.parametrize("n", [5, 20, 50])
    def test_null_calibration(self, n):
        draws = 2000
        u = RngStream(77, n).uniform((draws, n))
        p = gof.ks_sf(gof.ks_statistic_sorted(np.sort(u, axis=1)), n)
        for a in (0.05, 0.10, 0.25):
            assert np.mean(p <= a) <= a + 3 * math.sqrt(a * (1 - a) / draws)


class TestChisq:
    def test_examples(self):
        med = stats.chi2.median(7)
        assert gof.chisq_variance_pvalue(med, 7).value == pytest.approx(1.0, abs=1e-12)
        assert gof.chisq_variance_pvalue(4.0, 2).value == pytest.approx(2 * math.exp(-2), rel=1e-13)
        assert gof.chisq_variance_pvalue(0.0, 2).value == gof.PVALUE_FLOOR

    def test_monotone_away_from_median(self):
        med = stats.chi2.median(50)
        up = gof.chisq_two_tail(np.linspace(med, 200, 100), 50)
        down = gof.chisq_two_tail(np.linspace(med, 0.5, 100), 50)
        assert np.all(np.diff(up) <= 0) and np.all(np.diff(down) <= 0)

    def test_negative(self):
        with pytest.raises(DomainError):
            gof.chisq_variance_pvalue(-1.0, 3)


class TestNcx2:
    def test_examples(self):
        p = gof.ncx2_two_tail(2, 0.0, 2.0)
        assert p.method is PValueMethod.NCX2_TWO_TAIL
        assert p.value == pytest.approx(math.exp(-1), rel=1e-13)
        med = stats.ncx2.median(100, 160)
        assert gof.ncx2_two_tail(100, 160.0, med).value == pytest.approx(0.5, abs=1e-9)
        q975 = stats.ncx2.ppf(0.975, 100, 160)
        assert gof.ncx2_two_tail(100, 160.0, q975).value == pytest.approx(0.025, abs=1e-9)

    @given(st.integers(1, 150), st.floats(0, 500), st.floats(1e-3, 2000))
    def test_at_most_half(self, df, nc, s):
        assert 0 < gof.ncx2_two_tail(df, nc, s).value <= 0.5

    def test_floor(self):
        assert gof.ncx2_two_tail(100, 160.0, 1e4).value == gof.PVALUE_FLOOR
        with pytest.raises(DomainError):
            gof.ncx2_two_tail(2, 1.0, 0.0)


def test_pvalue_type():
    with pytest.raises(DomainError):
        gof.PValue(1.5, PValueMethod.KS_EXACT)
    assert float(gof.PValue(0.25, PValueMethod.KS_EXACT)) == 0.25
