import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dynmatch import analytics as an
from dynmatch.analytics import MarketParams
from dynmatch.fluid import stationary_xbar
from dynmatch.specfun import ConvergenceError, lambert_w0
from dynmatch.utility_models import CorrelatedPareto, Exponential, Pareto, Uniform

P1000 = MarketParams.symmetric(1.0, 1.0, 1000)
EXP, PAR, UNI = Exponential(1.0), Pareto(1.0, 2.0), Uniform(0.0, 1.0)
UNBAL = MarketParams(2.0, 1.0, 1.0, 1.0, 1000)


class TestMarketParams:
    def test_symmetric(self):
        assert P1000.is_symmetric and P1000.lam == 1.0 and P1000.eta == 1.0
        assert not UNBAL.is_symmetric
        with pytest.raises(ValueError):
            UNBAL.lam

    @pytest.mark.parametrize("kw", [dict(lambda_b=-1), dict(eta_s=0), dict(n=0), dict(n=2.5),
                                    dict(lambda_s=math.inf)])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            MarketParams(**kw)

    def test_empty_market_only_for_simulation(self):
        p = MarketParams(0.0, 0.0, 1.0, 1.0, 10)
        with pytest.raises(ValueError):
            an.upper_bound_rate(EXP, p)


class TestRootFinders:
    def test_bisect(self):
        assert an.bisect(lambda x: x * x - 2, 0, 2) == pytest.approx(math.sqrt(2), abs=1e-12)

    def test_bisect_needs_bracket(self):
        with pytest.raises(ConvergenceError):
            an.bisect(lambda x: x * x + 1, -1, 1)

    def test_golden(self):
        assert an.golden_max(lambda x: -(x - 0.3) ** 2, 0, 1) == pytest.approx(0.3, abs=1e-8)


class TestUpperAndGreedy:
    @pytest.mark.parametrize("model,want", [(EXP, 7485), (PAR, 56_050)])
    def test_upper_bound(self, model, want):
        assert an.upper_bound_rate(model, P1000) == pytest.approx(want, rel=5e-3)

    def test_upper_bound_uniform_formula(self):
        # n lambda (b - (b - a)/n); the quoted 987.4 is not this expression
        assert an.upper_bound_rate(UNI, P1000) == pytest.approx(999.0, rel=1e-12)

    @pytest.mark.parametrize("model,want", [(EXP, 3757), (PAR, 8791), (UNI, 948.2)])
    def test_greedy(self, model, want):
        assert an.greedy_rate(model, P1000) == pytest.approx(want, rel=5e-3)

    def test_greedy_correction_factor(self):
        ratio = an.greedy_rate(PAR, P1000) / an.greedy_rate(PAR, P1000, corrected=False)
        assert ratio == pytest.approx(1 - 1 / math.sqrt(2 * math.pi * 1000), rel=1e-14)

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            an.greedy_rate(PAR, UNBAL)
        with pytest.raises(ValueError):
            an.upper_bound_rate(PAR, UNBAL)


class TestPopulationThreshold:
    def test_exponential(self):
        sol = an.population_threshold(EXP, P1000)
        assert sol.threshold == pytest.approx(144.8, abs=0.1)
        assert sol.predicted_rate == pytest.approx(5553, rel=5e-3)

    def test_pareto(self):
        sol = an.population_threshold(PAR, P1000)
        assert sol.threshold == pytest.approx(1000 / 3, abs=1e-9)
        assert sol.fluid_point == pytest.approx((1 / 3, 1 / 3))
        assert sol.predicted_rate == pytest.approx(21_573, rel=5e-3)

    def test_uniform_is_greedy(self):
        sol = an.population_threshold(UNI, P1000)
        assert sol.threshold == 0.0
        assert sol.predicted_rate == pytest.approx(an.greedy_rate(UNI, P1000))

    def test_delta_family(self):
        sol = an.population_threshold(EXP, P1000, delta=1.0)
        assert sol.threshold == pytest.approx(1000 / EXP.m_asymptotic(1000))

    def test_fast_abandonment_drives_threshold_to_zero(self):
        zs = [an.population_threshold(PAR, MarketParams.symmetric(1, eta, 1000)).threshold
              for eta in (1, 10, 1e3, 1e6)]
        assert zs == sorted(zs, reverse=True) and zs[-1] < 1e-3

    def test_small_n_rejected(self):
        with pytest.raises(ValueError):
            an.population_threshold(EXP, MarketParams.symmetric(1, 1, 2))

    def test_upper_to_population_ratio(self):
        beta = 2.0
        want = 1 / ((1 / (1 + beta)) ** (1 / beta) * beta / (1 + beta))
        got = an.upper_bound_rate(PAR, P1000) / an.population_threshold(PAR, P1000).predicted_rate
        assert got == pytest.approx(want, rel=1e-9)
        assert got == pytest.approx(3 * math.sqrt(3) / 2, rel=1e-9)

    def test_ordering(self):
        g = an.greedy_rate(PAR, P1000)
        p = an.population_threshold(PAR, P1000).predicted_rate
        u = an.utility_threshold_opt(PAR, P1000).predicted_rate
        ub = an.upper_bound_rate(PAR, P1000)
        assert g < p < u < ub


class TestUtilityThreshold:
    def test_pareto_values(self):
        sol = an.utility_threshold_opt(PAR, P1000)
        x = sol.auxiliary["x_star"]
        assert x == pytest.approx(0.512, abs=1e-3)
        assert sol.threshold == pytest.approx(42.8, abs=0.1)
        assert sol.predicted_rate == pytest.approx(43_756, rel=5e-3)
        assert abs(sol.auxiliary["residual"]) <= 1e-10
        assert 0 < x < 1

    def test_closed_form_threshold(self):
        sol = an.utility_threshold_opt(PAR, P1000)
        x = sol.auxiliary["x_star"]
        assert sol.threshold == pytest.approx(math.sqrt(1000 * x / math.log(2 / (x + 1))), rel=1e-9)

    def test_lambert_round_trip(self):
        sol = an.utility_threshold_opt(PAR, P1000)
        x = sol.auxiliary["x_star"]
        assert stationary_xbar(sol.auxiliary["v_scaled"], 1, 1, 0.5, 1 / math.pi) == pytest.approx(x, abs=1e-8)
        # and the same through lambert_w0 written out by hand
        q = (1 / math.pi) / sol.auxiliary["v_scaled"] ** 2
        assert lambert_w0(2 * q * math.exp(q)) / q - 1 == pytest.approx(x, abs=1e-8)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.2, 5.0), st.floats(0.2, 5.0), st.floats(1.2, 6.0))
    def test_solver_properties(self, lam, eta, beta):
        params = MarketParams.symmetric(lam, eta, 500)
        sol = an.utility_threshold_opt(Pareto(1, beta), params)
        assert abs(sol.auxiliary["residual"]) <= 1e-10
        assert 0 < sol.auxiliary["x_star"] < lam / eta

    def test_light_tail_rejected(self):
        with pytest.raises(ValueError):
            an.utility_threshold_opt(EXP, P1000)


class TestHeuristics:
    def test_exp(self):
        assert an.utility_threshold_heuristic_exp(P1000) == pytest.approx(5.56, abs=0.01)

    def test_exp_grows_with_n(self):
        v3 = an.utility_threshold_heuristic_exp(P1000)
        v4 = an.utility_threshold_heuristic_exp(MarketParams.symmetric(1, 1, 10 ** 4))
        ln = math.log(1e4)
        assert v4 == pytest.approx(ln - math.log(ln) - math.log(math.log(2 * ln / (ln + 1))), rel=1e-14)
        assert v4 > v3

    def test_exp_rate_scaling(self):
        assert an.utility_threshold_heuristic_exp(P1000, nu=2) == pytest.approx(
            an.utility_threshold_heuristic_exp(P1000) / 2, rel=1e-15)

    def test_exp_bad_inner_log(self):
        with pytest.raises(ValueError):
            an.utility_threshold_heuristic_exp(MarketParams.symmetric(1, 50, 1000))

    def test_uniform(self):
        assert an.utility_threshold_heuristic_uniform(P1000) == pytest.approx(0.974, abs=1e-3)

    def test_uniform_limit(self):
        assert an.utility_threshold_heuristic_uniform(MarketParams.symmetric(1, 1, 10 ** 12)) == pytest.approx(1, abs=1e-5)

    def test_uniform_affine(self):
        assert an.utility_threshold_heuristic_uniform(P1000, 2, 3) == pytest.approx(
            2 + an.utility_threshold_heuristic_uniform(P1000), rel=1e-14)


class TestUnbalanced:
    def test_values(self):
        sol = an.unbalanced_utility_threshold(PAR, UNBAL)
        assert sol.auxiliary["s_star"] == pytest.approx(0.365, abs=1e-3)
        assert sol.auxiliary["tau_star"] == pytest.approx(0.361, abs=1e-3)
        assert sol.threshold == pytest.approx(52.7, abs=0.1)
        assert sol.predicted_rate == pytest.approx(70_992, rel=5e-3)
        b, s = sol.fluid_point
        assert b == pytest.approx(s + 1.0)

    def test_tau_equation_residual(self):
        sol = an.unbalanced_utility_threshold(PAR, UNBAL)
        s, b, t = sol.auxiliary["s_star"], sol.auxiliary["b_star"], sol.auxiliary["tau_star"]
        assert 2 * math.exp(-s * t) + math.exp(-b * t) - (s + 2) == pytest.approx(0, abs=1e-12)

    def test_H_maximized(self):
        sol = an.unbalanced_utility_threshold(PAR, UNBAL)
        alpha = 0.5
        from dynmatch.specfun import lower_incomplete_gamma as g

        def H(s):
            b = s + 1.0
            t = an._tau_of_s(s, b, UNBAL)
            return b ** alpha * g(0.5, b * t) + 2 * s ** alpha * g(0.5, s * t)

        h_star = sol.auxiliary["H_star"]
        for s in np.linspace(1e-4, 1 - 1e-4, 1000):
            assert H(s) <= h_star + 1e-12

    def test_reduces_to_symmetric(self):
        sol = an.unbalanced_utility_threshold(PAR, P1000)
        ref = an.utility_threshold_opt(PAR, P1000)
        assert sol.threshold == pytest.approx(ref.threshold, rel=1e-6)
        assert sol.predicted_rate == pytest.approx(ref.predicted_rate, rel=1e-6)

    def test_monotone_in_buyer_rate(self):
        mid = an.unbalanced_utility_threshold(PAR, MarketParams(1.5, 1, 1, 1, 1000)).threshold
        assert 42.8 < mid < 52.7
        assert an.utility_threshold_opt(PAR, P1000).threshold < mid < an.unbalanced_utility_threshold(PAR, UNBAL).threshold

    def test_degenerate(self):
        with pytest.raises(ValueError):
            an.unbalanced_utility_threshold(PAR, MarketParams(0.0, 1, 1, 1, 1000))


class TestBatch:
    def test_values(self):
        sol = an.batch_window(P1000, 0.5)
        assert sol.threshold == pytest.approx(0.76, abs=5e-3)
        assert sol.predicted_rate == pytest.approx(28_644, rel=5e-3)
        assert sol.auxiliary["matches_per_cycle"] == pytest.approx(532, rel=0.01)
        assert abs(sol.auxiliary["residual"]) <= 1e-12
        assert sol.auxiliary["lower_bound_constant"] == pytest.approx((1 - 1.5 * math.exp(-0.5)) ** 2)
        assert sol.auxiliary["lower_bound"] < sol.predicted_rate

    def test_root_is_profile_maximum(self):
        sol = an.batch_window(P1000, 0.5)
        grid = np.linspace(0.05, 5, 5000)
        best = grid[np.argmax([an.batch_rate_profile(d, P1000, 0.5) for d in grid])]
        assert best == pytest.approx(sol.threshold, abs=2e-3)

    def test_small_alpha(self):
        assert an.batch_window(P1000, 1e-4).threshold < 1e-3

    def test_increasing_in_alpha(self):
        assert an.batch_window(P1000, 0.3).threshold < an.batch_window(P1000, 0.7).threshold

    def test_scale(self):
        assert an.batch_window(P1000, 0.5, scale=0.5).predicted_rate == pytest.approx(
            an.batch_window(P1000, 0.5).predicted_rate / 2)

    def test_alpha_range(self):
        for a in (0.0, 1.0):
            with pytest.raises(ValueError):
                an.batch_window(P1000, a)

    def test_unbalanced_symmetric(self):
        a = an.unbalanced_batch_window(P1000, 0.5)
        b = an.batch_window(P1000, 0.5)
        assert a.threshold == pytest.approx(b.threshold, rel=1e-8)
        assert a.predicted_rate == pytest.approx(b.predicted_rate, rel=1e-8)

    def test_unbalanced_dense_grid(self):
        sol = an.unbalanced_batch_window(UNBAL, 0.5)
        d = np.arange(1e-4, 5.0 + 1e-12, 1e-4)
        xi = np.minimum(2 * -np.expm1(-d), -np.expm1(-d))
        obj = xi ** 1.5 / d
        k = int(np.argmax(obj))
        assert sol.threshold == pytest.approx(d[k], abs=1e-4)
        assert sol.auxiliary["xi"] ** 1.5 / sol.threshold >= obj[k]

    def test_unbalanced_slack_seller_side(self):
        sol = an.unbalanced_batch_window(MarketParams(1.0, 1e6, 1.0, 1.0, 1000), 0.5)
        assert sol.threshold == pytest.approx(an.batch_window(P1000, 0.5).threshold, rel=1e-9)


class TestCorrelatedInvariance:
    @pytest.mark.parametrize("rho", [0.0, 0.3, 0.8])
    def test_population_threshold_ignores_rho(self, rho):
        assert an.population_threshold(CorrelatedPareto(rho), P1000).threshold == pytest.approx(
            an.population_threshold(CorrelatedPareto(0.0), P1000).threshold, rel=1e-15)

    @pytest.mark.parametrize("rho", [0.3, 0.6, 0.9])
    def test_utility_threshold_scaling(self, rho):
        # the bounded rho E[U0] term decays only like n^(-1/3) against the leading part
        params = MarketParams.symmetric(1, 1, 10 ** 9)
        s = math.sqrt(1 - rho ** 2)
        a = an.utility_threshold_opt(CorrelatedPareto(rho), params)
        b = an.utility_threshold_opt(CorrelatedPareto(0.0), params)
        assert a.threshold / b.threshold == pytest.approx(s, rel=0.02)
        assert a.predicted_rate / b.predicted_rate == pytest.approx(s, rel=0.02)
        pa = an.population_threshold(CorrelatedPareto(rho), params).predicted_rate
        pb = an.population_threshold(CorrelatedPareto(0.0), params).predicted_rate
        assert pa / pb == pytest.approx(s, rel=0.02)

    def test_leading_term_scaling_exact(self):
        m0, m1 = CorrelatedPareto(0.0), CorrelatedPareto(0.6)
        assert m1.m_leading(1000) / m0.m_leading(1000) == pytest.approx(0.8, rel=1e-14)


def test_convergence_error_is_exported():
    assert issubclass(ConvergenceError, ArithmeticError)
