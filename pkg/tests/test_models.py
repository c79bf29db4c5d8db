import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from typik import gof
from typik.dist import RngStream
from typik.errors import DomainError
from typik.models import (
    DataShape,
    Dataset,
    GridAxis,
    LeCam,
    NeymanScott,
    ParamPoint,
    Stein,
    lecam_cdf,
    lecam_gof_pvalue,
    lecam_loglik,
    lecam_loglik_parts,
    load_dataset,
    make_model,
    neyman_scott_gof_pvalue,
    neyman_scott_loglik,
    neyman_scott_profile,
    sample,
    stein_marginal_loglik,
    stein_mom_estimate,
    stein_profile_loglik,
)

PHI = 4 * math.sqrt(10)


def lecam_seed42():
    m = LeCam(100)
    return m, m.sample(m.point((1.0, 2.0)), RngStream(42))


class TestContainers:
    def test_dataset_shapes(self):
        assert Dataset.scalar([1, 2, 3]).n == 3
        d = Dataset.paired([[0, 2], [1, 3]])
        assert d.n == 2 and np.array_equal(d.values, [0, 2, 1, 3])
        assert np.array_equal(d.pairs, [[0, 2], [1, 3]])
        with pytest.raises(DomainError):
            Dataset(DataShape.PAIRED_SAMPLE, [1, 2, 3], 2)
        with pytest.raises(DomainError):
            Dataset.scalar([1.0, np.nan])
        with pytest.raises(DomainError):
            Dataset.scalar([1.0]).pairs

    def test_param_point(self):
        p = ParamPoint("lecam", (1, 2), ("mu", "sigma2"))
        assert p["sigma2"] == 2.0
        with pytest.raises(DomainError):
            ParamPoint("lecam", (1,), ("mu", "sigma2"))
        with pytest.raises(DomainError):
            LeCam().point((0.0, -1.0))
        with pytest.raises(DomainError):
            Stein(5).point((-0.1,))
        with pytest.raises(DomainError):
            NeymanScott(3).point((0.0,))

    def test_grid_axis(self):
        assert np.allclose(GridAxis(0, 1, 3).values(), [0, 0.5, 1])
        assert np.allclose(GridAxis(1, 100, 3, "log").values(), [1, 10, 100])
        for bad in [(0, 1, 1), (1, 0, 3), (0, 1, 3, "log"), (0, 1, 3, "sqrt")]:
            with pytest.raises(DomainError):
                GridAxis(*bad)

    def test_model_specs(self):
        assert LeCam().spec.constants["alpha"] == 1e-50
        assert Stein(4).spec.has_marginal_loglik
        assert NeymanScott(3).spec.has_profile_nuisance
        for bad in [lambda: LeCam(alpha=0.0), lambda: LeCam(alpha=1.0), lambda: NeymanScott(1), lambda: Stein(0)]:
            with pytest.raises(DomainError):
                bad()


class TestLeCam:
    def test_single_point(self):
        for a in (1e-50, 0.3, 0.9):
            assert lecam_loglik([0.7], 0.7, 1.0, a) == pytest.approx(-0.918938533204673, abs=1e-12)

    def test_alpha_zero(self, rng):
        x = rng.normal(size=50)
        assert lecam_loglik(x, 0.2, 3.0, 0.0) == pytest.approx(stats.norm.logpdf(x, 0.2).sum(), abs=1e-12)

    def test_excess_strictly_increasing(self):
        _, x = lecam_seed42()
        x1 = x.values[0]
        parts = [lecam_loglik_parts(x, x1, 10.0**-k, 1e-50) for k in range(2, 13, 2)]
        base = {b for b, _ in parts}
        excess = [e for _, e in parts]
        assert len(base) == 1
        assert all(b > a for a, b in zip(excess, excess[1:]))

    def test_float_loglik_diverges_on_geometric_grid(self):
        _, x = lecam_seed42()
        x1 = x.values[0]
        at_one = lecam_loglik(x, x1, 1.0)
        s2 = 10.0 ** -np.arange(2, 240, 2)
        vals = np.array([lecam_loglik(x, x1, v) for v in s2])
        assert vals.max() > at_one
        tail = vals[s2 < 1e-120]
        assert np.all(np.diff(tail) > 0)

    def test_parts_sum_to_total(self, rng):
        x = rng.normal(1, 1.3, size=20)
        b, e = lecam_loglik_parts(x, 0.9, 0.4, 0.2)
        assert b + e == pytest.approx(lecam_loglik(x, 0.9, 0.4, 0.2), rel=1e-13)

    def test_sigma2_must_be_positive(self):
        with pytest.raises(DomainError):
            lecam_loglik([0.0], 0.0, 0.0)

    def test_cdf(self):
        for s2 in (0.01, 1.0, 50.0):
            assert lecam_cdf(0.3, 0.3, s2, 0.2) == 0.5
        t = np.linspace(-3, 3, 100)
        assert np.allclose(lecam_cdf(t, 0.1, 4.0, 1.0), stats.norm.cdf(t, 0.1, 2.0))
        assert np.all(np.diff(lecam_cdf(t, 0.0, 0.1, 0.3)) >= 0)

    def test_pvalue_profile_peaks_near_one(self):
        _, x = lecam_seed42()
        mus = np.linspace(-1, 3, 401)
        for s2 in (1e-8, 0.5, 2.0):
            p = [lecam_gof_pvalue(x, m, s2).value for m in mus]
            assert abs(mus[int(np.argmax(p))] - 1.0) < 0.3

    def test_pvalue_insensitive_to_sigma2(self):
        _, x = lecam_seed42()
        ps = {lecam_gof_pvalue(x, 1.1, s2).value for s2 in (1e-10, 1e-3, 1.0, 10.0, 1e3)}
        assert len(ps) == 1

    def test_pit_perfect_sample(self):
        n = 100
        x = stats.norm.ppf(np.arange(1, n + 1) / (n + 1), loc=1.0)
        assert lecam_gof_pvalue(x, 1.0, 2.0).value >= 0.99

    def test_sampling_nearly_pure_normal(self):
        m = LeCam(10**4)
        x = m.sample(m.point((1.0, 2.0)), RngStream(5))
        assert stats.kstest(x.values, "norm", args=(1.0, 1.0)).pvalue > 0.01

    def test_batched_matches_scalar(self, rng):
        m, x = lecam_seed42()
        th = np.column_stack([rng.uniform(0, 2, 5), np.exp(rng.uniform(-20, 3, 5))])
        st_ = np.repeat(m.stat(x)[None, :], 5, axis=0)
        ll = m.loglik(st_, th)
        pv = m.pvalue(st_, th)
        for i in range(5):
            assert ll[i] == pytest.approx(lecam_loglik(x, *th[i]), rel=1e-14)
            assert pv[i] == pytest.approx(lecam_gof_pvalue(x, *th[i]).value, rel=1e-12)


class TestNeymanScott:
    PAIRS = Dataset.paired([[0.0, 2.0], [1.0, 3.0]])

    def test_profile(self):
        xi, s2 = neyman_scott_profile(self.PAIRS)
        assert np.array_equal(xi, [1.0, 2.0]) and s2 == 1.0
        assert neyman_scott_profile(Dataset.paired([[1, 1], [2, 2]]))[1] == 0.0

    def test_loglik_and_pvalue(self):
        assert neyman_scott_loglik(self.PAIRS, 1.0) == -2.0
        assert neyman_scott_gof_pvalue(self.PAIRS, 1.0).value == pytest.approx(2 * math.exp(-2), rel=1e-13)
        with pytest.raises(DomainError):
            neyman_scott_loglik(self.PAIRS, 0.0)

    def test_pvalue_at_median_and_far(self, rng):
        x = Dataset.paired(rng.normal(size=(30, 2)))
        _, s2 = neyman_scott_profile(x)
        at_med = 2 * 30 * s2 / stats.chi2.median(30)
        assert neyman_scott_gof_pvalue(x, at_med).value == pytest.approx(1.0, abs=1e-12)
        far = [neyman_scott_gof_pvalue(x, v).value for v in (10.0, 1e3, 1e6)]
        assert far[0] > far[1] > far[2] and far[2] < 1e-80

    def test_loglik_shape(self, rng):
        x = Dataset.paired(rng.normal(size=(40, 2)))
        _, s2 = neyman_scott_profile(x)
        grid = np.linspace(0.2 * s2, 5 * s2, 2001)
        ll = np.array([neyman_scott_loglik(x, v) for v in grid])
        assert abs(grid[np.argmax(ll)] - s2) <= grid[1] - grid[0]
        assert np.all(np.diff(ll[grid > s2]) < 0)

    def test_model_matches_functions(self, rng):
        x = Dataset.paired(rng.normal(size=(25, 2)))
        m = make_model("neyman_scott", x)
        th = np.array([[0.3], [1.0], [2.5]])
        st_ = np.repeat(m.stat(x)[None, :], 3, axis=0)
        base = neyman_scott_loglik(x, 1.0) - m.loglik(st_[:1], th[1:2])[0]
        for i in range(3):
            assert m.loglik(st_[i : i + 1], th[i : i + 1])[0] + base == pytest.approx(neyman_scott_loglik(x, th[i, 0]))
            assert m.pvalue(st_[i : i + 1], th[i : i + 1])[0] == pytest.approx(
                neyman_scott_gof_pvalue(x, th[i, 0]).value, rel=1e-12
            )

    def test_mle_mean_half(self):
        vals = []
        for r in range(500):
            s = RngStream(100, r)
            xi = s.child(1).normal(100)
            m = NeymanScott(100, xi=xi)
            vals.append(neyman_scott_profile(m.sample(m.point((1.0,)), s.child(0)))[1])
        vals = np.array(vals)
        assert abs(vals.mean() - 0.5) < 3 * vals.std(ddof=1) / math.sqrt(vals.size)

    def test_statistic_is_chisq(self):
        m = NeymanScott(100, xi=np.linspace(-3, 3, 100))
        T = [m.stat(m.sample(m.point((1.7,)), RngStream(8, r)))[0] / 1.7 for r in range(2000)]
        assert stats.kstest(T, stats.chi2(100).cdf).pvalue > 0.001

    def test_ks_full_option(self, rng):
        x = Dataset.paired(rng.normal(size=(20, 2)))
        m = make_model("neyman_scott", x, gof="ks-full")
        assert m.stat(x).size == 41
        p = m.pvalue(m.stat(x)[None, :], np.array([[1.0]]))[0]
        assert 0 < p <= 1
        with pytest.raises(DomainError):
            NeymanScott(3, gof="other")


class TestStein:
    def test_profile(self):
        assert stein_profile_loglik(16.1, 16.1) == 0.0
        assert stein_profile_loglik(16.10, 12.65) == pytest.approx(-5.95125, abs=1e-12)
        with pytest.raises(DomainError):
            stein_profile_loglik(-1.0, 1.0)

    @given(st.floats(0, 50), st.floats(0, 1))
    def test_profile_symmetric(self, r, frac):
        d = frac * r
        assert stein_profile_loglik(r, r + d) == pytest.approx(stein_profile_loglik(r, r - d), rel=1e-13, abs=1e-13)

    def test_marginal(self):
        assert stein_marginal_loglik(2.0, 0.0, 2) == pytest.approx(math.log(math.exp(-1) / 2), abs=1e-12)
        assert stein_marginal_loglik(80.0, 0.0, 100) == pytest.approx(stats.chi2.logpdf(80.0, 100), abs=1e-10)
        grid = np.linspace(0, 25, 2501)
        ll = [stein_marginal_loglik(260.0, p, 100) for p in grid]
        assert abs(grid[int(np.argmax(ll))] - math.sqrt(160)) < 0.2
        with pytest.raises(DomainError):
            stein_marginal_loglik(0.0, 1.0, 3)

    def test_mom(self):
        assert stein_mom_estimate(260, 100) == pytest.approx(12.6491106, abs=1e-7)
        assert stein_mom_estimate(50, 100) == 0.0
        assert stein_mom_estimate(100, 100) == 0.0

    def test_sampled_squared_norm(self):
        m = Stein(100)
        s = m.sample_stats(m.point((PHI,)), [RngStream(4, r) for r in range(10**4)])[:, 0]
        assert abs(s.mean() - 260) < 3 * s.std(ddof=1) / 100

    def test_direction_invariance(self):
        a = Stein(10)
        b = Stein(10, direction=np.eye(10)[3])
        sa = a.stat(a.sample(a.point((3.0,)), RngStream(1)))
        sb = b.stat(b.sample(b.point((3.0,)), RngStream(1)))
        assert sa.shape == sb.shape == (1,)

    def test_profile_grid_maximizer_is_norm(self, rng):
        x = Dataset.vector(rng.normal(1.2, 1, 100))
        r = np.linalg.norm(x.values)
        grid = GridAxis(0, 2 * r, 400).values()
        m = Stein(100)
        ll = m.loglik(np.full((400, 1), r * r), grid[:, None])
        assert abs(grid[np.argmax(ll)] - r) <= grid[1] - grid[0]


class TestSampling:
    def test_determinism(self):
        for m, th in [(LeCam(20), (0.0, 1.0)), (NeymanScott(5), (2.0,)), (Stein(7), (1.0,))]:
            a = sample(m, m.point(th), RngStream(3, 4)).values
            b = sample(m, m.point(th), RngStream(3, 4)).values
            assert np.array_equal(a, b)

    def test_invalid_theta(self):
        with pytest.raises(DomainError):
            sample(Stein(3), ParamPoint("stein", (-1.0,), ("phi",)), RngStream(0))
        with pytest.raises(DomainError):
            sample(Stein(3), ParamPoint("lecam", (0.0, 1.0), ("mu", "sigma2")), RngStream(0))

    @pytest.mark.parametrize("model_id,theta", [("lecam", (1.0, 2.0)), ("neyman_scott", (1.0,)), ("stein", (PHI,))])
    def test_gof_super_uniform_at_truth(self, model_id, theta):
        m = make_model(model_id, None, n=100)
        reps = 2000
        stats_ = m.sample_stats(m.point(theta), [RngStream(55, r) for r in range(reps)])
        p = m.pvalue(stats_, np.tile(theta, (reps, 1)))
        if model_id == "stein":
            p = 2 * p  # the Stein penalty omits the factor 2 of a two-tailed p-value
        for a in (0.05, 0.10, 0.25):
            assert np.mean(p <= a) <= a + 3 * math.sqrt(a * (1 - a) / reps)


class TestIngestion:
    def test_load_formats(self, tmp_path):
        f = tmp_path / "pairs.csv"
        f.write_text("a,b\n0,2\n1,3\n")
        d = load_dataset(f, "paired_sample", header=True)
        assert d.n == 2
        g = tmp_path / "x.csv"
        g.write_text("1.5\n2.5\n-1\n")
        assert load_dataset(g, "scalar_sample").n == 3
        assert load_dataset(g, "vector_observation").shape is DataShape.VECTOR_OBSERVATION
        with pytest.raises(DomainError):
            load_dataset(f, "scalar_sample", header=True)

    def test_make_model(self):
        x = Dataset.paired([[0, 2], [1, 3], [5, 5]])
        m = make_model("neyman_scott", x)
        assert m.n == 3 and np.allclose(m.xi, [1, 2, 5])
        with pytest.raises(DomainError):
            make_model("nope")
        with pytest.raises(DomainError):
            make_model("stein", x)
