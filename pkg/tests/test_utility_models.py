import math
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from dynmatch.specfun import EULER_GAMMA, gamma_fn
from dynmatch.utility_models import (CorrelatedPareto, Exponential, FrechetCrowding, Pareto, Uniform,
                                     alpha_of, cdf_max, kappa_of, m_asymptotic, m_exact,
                                     max_from_uniforms, parse_model, sample_max)

IID = [Exponential(1.0), Uniform(0.0, 1.0), Pareto(1.0, 2.0)]
ALL = IID + [CorrelatedPareto(0.5), FrechetCrowding(2.0)]

# E[max of 100 Pareto(1,2)] = k B(k, 1/2), 50 digits via mpmath
PARETO_MAX_100 = 17.746707942830701389164695295392524384962232772472


class TestConstants:
    def test_alpha(self):
        assert alpha_of(Pareto(1, 2)) == 0.5
        assert alpha_of(Exponential(1)) == 0.0
        assert alpha_of(Uniform(0, 1)) == 0.0
        assert alpha_of(CorrelatedPareto(0.5)) == pytest.approx(1 / 3)
        assert alpha_of(FrechetCrowding(3.0)) == pytest.approx(1 / 3)

    @pytest.mark.parametrize("model", ALL, ids=repr)
    def test_alpha_range(self, model):
        assert 0.0 <= alpha_of(model) < 1.0

    def test_kappa_pareto_two(self):
        assert kappa_of(Pareto(1, 2)) == pytest.approx(1 / math.pi, rel=1e-14)
        for c in (0.1, 3.0, 17.0):
            assert kappa_of(Pareto(c, 2)) == pytest.approx(1 / math.pi, rel=1e-14)

    def test_kappa_pareto_three(self):
        assert kappa_of(Pareto(1, 3)) == pytest.approx(gamma_fn(2 / 3) ** -3, rel=1e-14)

    def test_kappa_undefined_for_light_tails(self):
        with pytest.raises(ValueError):
            kappa_of(Exponential(1))

    def test_frechet_limit_pareto_three(self):
        # M(n)/m(n) => X with P(X <= t) = exp(-kappa t^-beta) and E X = 1
        model = Pareto(1, 3)
        n = 10 ** 5
        rng = np.random.default_rng(11)
        x = model.sample_max_many(n, 200_000, rng) / m_asymptotic(model, n)
        se = x.std(ddof=1) / math.sqrt(len(x))
        assert abs(x.mean() - 1.0) < 4 * se
        kappa = kappa_of(model)
        res = stats.kstest(x, lambda t: np.exp(-kappa * np.asarray(t, float) ** -3.0))
        assert res.pvalue > 0.01


class TestMAsymptotic:
    def test_exponential(self):
        assert m_asymptotic(Exponential(1), 1000) == pytest.approx(EULER_GAMMA + math.log(1000))
        assert m_asymptotic(Exponential(1), 1000) == pytest.approx(7.485, abs=5e-4)
        assert m_asymptotic(Exponential(2), 1000) == pytest.approx(7.485 / 2, abs=5e-4)

    def test_pareto(self):
        assert m_asymptotic(Pareto(1, 2), 1000) == pytest.approx(math.sqrt(1000 * math.pi), rel=1e-14)
        assert m_asymptotic(Pareto(1, 2), 1000) == pytest.approx(56.05, abs=0.01)

    def test_uniform(self):
        assert m_asymptotic(Uniform(0, 1), 1e6) == pytest.approx(1 - 1e-6, rel=1e-15)

    def test_pareto_scale_convention(self):
        # minimum is 1/c, so maxima shrink by 1/c
        assert m_asymptotic(Pareto(4, 2), 1e4) == pytest.approx(m_asymptotic(Pareto(1, 2), 1e4) / 4)
        assert m_asymptotic(Pareto(4, 2), 1e4) / m_exact(Pareto(4, 2), 10 ** 4) == pytest.approx(1, abs=0.02)

    def test_correlated(self):
        rho = 0.6
        s = math.sqrt(1 - rho ** 2)
        want = rho * math.sqrt(3) + s * gamma_fn(2 / 3) * 1000 ** (1 / 3) * 2 / math.sqrt(3)
        assert m_asymptotic(CorrelatedPareto(rho), 1000) == pytest.approx(want, rel=1e-14)

    @pytest.mark.parametrize("model", ALL, ids=repr)
    def test_domain(self, model):
        with pytest.raises(ValueError):
            m_asymptotic(model, 0.5)

    @pytest.mark.parametrize("model", IID, ids=repr)
    def test_ratio_to_exact_at_1e4(self, model):
        k = 10 ** 4
        assert m_asymptotic(model, k) / m_exact(model, k) == pytest.approx(1.0, abs=0.02)

    @pytest.mark.parametrize("model", [Pareto(1, 2), Pareto(2, 3), Uniform(0, 1), CorrelatedPareto(0.3),
                                       FrechetCrowding(2.0)], ids=repr)
    @pytest.mark.parametrize("x", [0.5, 2.0])
    def test_regular_variation(self, model, x):
        t = 1e6
        ratio = m_asymptotic(model, t * x) / m_asymptotic(model, t)
        assert ratio == pytest.approx(x ** alpha_of(model), rel=0.01)

    @pytest.mark.parametrize("x", [0.5, 2.0])
    def test_regular_variation_exponential(self, x):
        # slow variation converges like ln(x)/ln(t): 1% needs ln t > 100
        t = 1e300
        ratio = m_asymptotic(Exponential(1), t * x) / m_asymptotic(Exponential(1), t)
        assert ratio == pytest.approx(1.0, rel=0.01)

    def test_frechet_crowding_monte_carlo(self):
        model = FrechetCrowding(2.0)
        k = 10 ** 4
        x = model.sample_max_many(k, 400_000, np.random.default_rng(3))
        # infinite variance at beta = 2; a loose relative check on the mean
        assert np.median(x) > 0
        assert x.mean() / m_asymptotic(model, k) == pytest.approx(1.0, abs=0.03)


@lru_cache(maxsize=None)
def _m_exact_cached(name, k):
    return m_exact({"exp": Exponential(1), "par": Pareto(1, 2)}[name], k)


class TestMExact:
    @pytest.mark.parametrize("k", [1, 2, 7, 100, 5000])
    def test_uniform(self, k):
        assert m_exact(Uniform(0, 1), k) == pytest.approx(k / (k + 1), rel=1e-10)

    @pytest.mark.parametrize("k", [1, 2, 10, 1000, 20000])
    def test_exponential_harmonic(self, k):
        assert m_exact(Exponential(1), k) == pytest.approx(math.fsum(1 / i for i in range(1, k + 1)), rel=1e-8)

    def test_pareto_frozen(self):
        assert m_exact(Pareto(1, 2), 100) == pytest.approx(PARETO_MAX_100, rel=1e-8)

    def test_pareto_scaled(self):
        # k B(k, 1 - 1/beta) / c
        k, b, c = 50, 3.0, 2.0
        want = k * math.exp(math.lgamma(k) + math.lgamma(1 - 1 / b) - math.lgamma(k + 1 - 1 / b)) / c
        assert m_exact(Pareto(c, b), k) == pytest.approx(want, rel=1e-8)

    def test_pareto_monte_carlo(self):
        x = Pareto(1, 2).sample_max_many(100, 10 ** 7, np.random.default_rng(5))
        se = x.std(ddof=1) / math.sqrt(len(x))
        assert abs(x.mean() - m_exact(Pareto(1, 2), 100)) < 3 * se

    def test_correlated_rejected(self):
        with pytest.raises(ValueError):
            m_exact(CorrelatedPareto(0.2), 10)

    @pytest.mark.parametrize("name", ["exp", "par"])
    @pytest.mark.parametrize("mu", [100, 1000])
    def test_poisson_population(self, name, mu):
        # E[m(N)] ~ m(E N) for Poisson N
        rng = np.random.default_rng(mu)
        ns = rng.poisson(mu, 4000)
        vals, counts = np.unique(ns, return_counts=True)
        mean = sum(c * _m_exact_cached(name, int(v)) for v, c in zip(vals, counts)) / len(ns)
        assert mean == pytest.approx(_m_exact_cached(name, mu), rel=0.01)


class TestSampling:
    @pytest.mark.parametrize("model", ALL, ids=repr)
    def test_zero_mates(self, model):
        rng = np.random.default_rng(0)
        assert sample_max(model, 0, rng) == 0.0

    def test_uniform_mean(self):
        k = 9
        x = Uniform(0, 1).sample_max_many(k, 10 ** 6, np.random.default_rng(1))
        se = x.std(ddof=1) / 1e3
        assert abs(x.mean() - k / (k + 1)) < 3 * se

    @pytest.mark.parametrize("model,k", [(Exponential(1), 1), (Exponential(1.5), 40), (Uniform(0, 1), 3),
                                         (Uniform(2, 5), 200), (Pareto(1, 2), 50), (Pareto(3, 2.5), 7)],
                             ids=repr)
    def test_ks_against_power_cdf(self, model, k):
        x = model.sample_max_many(k, 10 ** 5, np.random.default_rng(k))
        cdf = np.vectorize(lambda v: model.cdf(v) ** k)
        assert stats.kstest(x, cdf).pvalue > 0.01

    def test_ks_scalar_path(self):
        model = Pareto(1, 2)
        rng = np.random.default_rng(9)
        x = np.array([sample_max(model, 50, rng) for _ in range(20_000)])
        assert stats.kstest(x, np.vectorize(lambda v: (1 - v ** -2.0) ** 50 if v > 1 else 0.0)).pvalue > 0.01

    @pytest.mark.parametrize("model,k", [(CorrelatedPareto(0.0), 5), (CorrelatedPareto(0.5), 20),
                                         (CorrelatedPareto(0.9), 3), (FrechetCrowding(2.0), 30),
                                         (FrechetCrowding(3.0), 1)], ids=repr)
    def test_ks_correlated_families(self, model, k):
        x = model.sample_max_many(k, 4000, np.random.default_rng(k + 100))
        cdf = np.vectorize(lambda v: model.cdf_max(k, v))
        assert stats.kstest(x, cdf).pvalue > 0.01

    @settings(max_examples=300, deadline=None)
    @given(st.sampled_from(IID), st.integers(1, 10 ** 6), st.floats(0.0, 1.0, exclude_max=True))
    def test_stochastic_monotonicity_common_numbers(self, model, k, u):
        p = model.kernel_params()
        assert max_from_uniforms(model.kind, *p, k + 1, u, 0.0) >= max_from_uniforms(model.kind, *p, k, u, 0.0)

    @pytest.mark.parametrize("model", ALL, ids=repr)
    def test_support(self, model):
        x = model.sample_max_many(4, 10_000, np.random.default_rng(2))
        assert np.all(x >= model.lower)
        assert np.all(np.isfinite(x))


class TestCdfMax:
    def test_exponential_k1(self):
        for v in (0.1, 1.0, 3.0):
            assert cdf_max(Exponential(1), 1, v) == pytest.approx(1 - math.exp(-v), rel=1e-14)

    def test_uniform(self):
        assert cdf_max(Uniform(0, 1), 3, 0.5) == pytest.approx(0.125, rel=1e-15)

    def test_pareto(self):
        assert cdf_max(Pareto(1, 2), 10, 5) == pytest.approx((1 - 1 / 25) ** 10, rel=1e-14)
        x = Pareto(1, 2).sample_max_many(10, 10 ** 6, np.random.default_rng(4))
        p = (1 - 1 / 25) ** 10
        assert abs(np.mean(x <= 5) - p) < 4 * math.sqrt(p * (1 - p) / 1e6)

    @pytest.mark.parametrize("model", ALL, ids=repr)
    def test_k_zero(self, model):
        assert cdf_max(model, 0, 0.5) == 1.0

    def test_correlated_rho_zero_is_power(self):
        base = Pareto(math.sqrt(3) / 2, 3)
        for v in (1.2, 2.0, 5.0):
            assert cdf_max(CorrelatedPareto(0.0), 4, v) == pytest.approx(base.cdf(v) ** 4, rel=1e-12)

    @pytest.mark.parametrize("model", [CorrelatedPareto(0.7), FrechetCrowding(2.5)], ids=repr)
    def test_monotone_in_v(self, model):
        vals = [cdf_max(model, 6, v) for v in np.linspace(model.lower, 30, 40)]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
        assert vals[-1] > 0.9


class TestParsing:
    @pytest.mark.parametrize("model", ALL, ids=repr)
    def test_round_trip(self, model):
        assert parse_model(model.spec_string()) == model

    def test_defaults(self):
        assert parse_model("pareto") == Pareto(1, 2)
        assert parse_model(" Exponential : nu = 2 ") == Exponential(2)

    @pytest.mark.parametrize("text", ["gauss", "pareto:c=1,gamma=2", "pareto:c", "uniform:a=2,b=1",
                                      "pareto:beta=1", "correlated_pareto:rho=1", "exponential:nu=0"])
    def test_rejects(self, text):
        with pytest.raises(ValueError):
            parse_model(text)
