import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import special, stats

from oracles import make_obs
from rdsize.data import compute_du
from rdsize.elicitation import (
    degree_trend,
    gamma_for,
    moment_match_priors,
    n_tilde,
    p_lower_bound,
    p_tilde,
    solve_beta_tail,
)
from rdsize.likelihood import DomainError
from rdsize.study import simulate_replicates
from rdsize.simulator import SimConfig


class TestLowerBound:
    def test_three_subjects(self):
        obs = make_obs([-1, 0, 0], [4, 3, 2], [0, 1, 2], [3, 3, 3])
        assert p_lower_bound(obs, 100) == pytest.approx(6 / 294)

    def test_lone_seed(self):
        obs = make_obs([-1], [1], [0], [3])
        assert p_lower_bound(obs, 10) == pytest.approx(1 / 9)

    def test_denominator(self):
        obs = make_obs([-1, 0, 0], [4, 3, 2], [0, 1, 2], [3, 3, 3])
        with pytest.raises(DomainError):
            p_lower_bound(obs, 2)

    def test_decreasing_in_N_hat(self, sim_small):
        vals = [p_lower_bound(sim_small.obs, N) for N in (100, 300, 1000, 1e5)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_below_truth_estimate(self, sim_small):
        du, _ = compute_du(sim_small.adjacency, sim_small.obs.degrees)
        assert p_lower_bound(sim_small.obs, 300) <= p_tilde(du, 300)


class TestBetaTail:
    def test_alpha_one_identity(self):
        assert solve_beta_tail(1.0, 0.01, 0.99) == pytest.approx(1.0, rel=1e-9)

    def test_alpha_one_median(self):
        ref = math.log(0.5) / math.log(0.99)
        assert solve_beta_tail(1.0, 0.01, 0.5) == pytest.approx(ref, rel=1e-9)
        assert ref == pytest.approx(68.97, abs=0.01)

    @given(st.floats(0.2, 50), st.floats(1e-6, 0.5), st.floats(0.01, 0.999))
    @settings(max_examples=200, deadline=None)
    def test_self_consistent(self, alpha, p_lo, level):
        beta = solve_beta_tail(alpha, p_lo, level)
        assert special.betainc(alpha, beta, p_lo) == pytest.approx(1 - level, abs=1e-8)
        assert stats.beta.sf(p_lo, alpha, beta) == pytest.approx(level, abs=1e-8)

    @given(st.floats(0.5, 20), st.floats(1e-5, 0.3), st.floats(1.01, 3))
    @settings(max_examples=100, deadline=None)
    def test_monotone_in_p_lo(self, alpha, p_lo, factor):
        assume(p_lo * factor < 0.5)
        # a larger bound needs less prior mass near zero, hence a smaller beta
        assert solve_beta_tail(alpha, p_lo * factor) < solve_beta_tail(alpha, p_lo)

    @pytest.mark.parametrize("args", [(0, 0.1), (1, 0), (1, 1), (1, 0.1, 1.0)])
    def test_rejects(self, args):
        with pytest.raises(ValueError):
            solve_beta_tail(*args)


class TestMomentMatch:
    def test_symmetry_point(self):
        pr = moment_match_priors(0.5, 1.0, 3)
        assert pr.beta == pytest.approx(3) and pr.gamma == pytest.approx(0)

    def test_gamma_prior(self):
        pr = moment_match_priors(0.01, 1.0, 10, v_lambda=1)
        assert (pr.eta, pr.xi) == (1.0, 1.0)

    @given(st.floats(1e-4, 0.99), st.floats(0.01, 50), st.floats(0.1, 100), st.floats(0.01, 10))
    @settings(max_examples=200, deadline=None)
    def test_prior_means(self, p, lam, alpha, v):
        pr = moment_match_priors(p, lam, alpha, v_lambda=v, c=2.0)
        assert pr.alpha / (pr.alpha + pr.beta) == pytest.approx(p, rel=1e-12)
        assert pr.eta / pr.xi == pytest.approx(lam, rel=1e-12)
        assert pr.eta / pr.xi ** 2 == pytest.approx(v, rel=1e-12)
        assert pr.c == 2.0
        assert math.exp(-pr.gamma) == pytest.approx(p / (1 - p), rel=1e-10)

    def test_gamma_for(self):
        assert gamma_for(0.01) == pytest.approx(math.log(99))

    def test_rejects(self):
        with pytest.raises(ValueError):
            moment_match_priors(1.0, 1.0, 3)


class TestPointEstimators:
    def test_n_tilde(self):
        assert n_tilde([3, 1], 0.5) == pytest.approx(5.5)

    @given(st.lists(st.integers(0, 30), min_size=1, max_size=40), st.floats(1e-4, 0.9))
    @settings(max_examples=200, deadline=None)
    def test_round_trip(self, du, p_bar):
        assume(sum(du) > 0)
        N = n_tilde(du, p_bar)
        assert p_tilde(du, N) == pytest.approx(p_bar, rel=1e-10)

    def test_domain(self):
        with pytest.raises(DomainError):
            n_tilde([1], 0.0)
        with pytest.raises(DomainError):
            p_tilde([1, 1, 1], 2)

    def test_recovers_truth(self):
        cfg = SimConfig(N=600, p=8 / 600, n_target=120, n_seeds=5)
        sims = simulate_replicates(cfg, 100, master_seed=21)
        est = np.array([n_tilde(compute_du(s.adjacency, s.obs.degrees)[0], cfg.p) for s in sims])
        assert abs(est.mean() - cfg.N) < 3 * est.std(ddof=1) / math.sqrt(est.size)


class TestDegreeTrend:
    def test_exact_line(self):
        fit = degree_trend([1, 2, 3])
        assert fit.slope == pytest.approx(1.0) and fit.se == pytest.approx(0.0, abs=1e-12)

    def test_constant(self):
        fit = degree_trend([4, 4, 4, 4])
        assert fit.slope == 0.0 and not fit.se_defined

    def test_against_normal_equations(self):
        rng = np.random.default_rng(0)
        d = rng.poisson(8, size=50)
        x = np.arange(1, 51)
        X = np.column_stack([np.ones(50), x])
        coef, res, *_ = np.linalg.lstsq(X, d, rcond=None)
        sigma2 = res[0] / 48
        se = math.sqrt(sigma2 * np.linalg.inv(X.T @ X)[1, 1])
        fit = degree_trend(d)
        assert fit.slope == pytest.approx(coef[1], rel=1e-10)
        assert fit.se == pytest.approx(se, rel=1e-8)
        t = coef[1] / se
        assert fit.p_value == pytest.approx(2 * stats.t.sf(abs(t), 48), rel=1e-8)

    def test_exclusion(self):
        fit = degree_trend([1, 2, 3, 500, 4], exclude_above=100)
        assert fit.n == 4 and fit.excluded == 1

    def test_too_few(self):
        with pytest.raises(ValueError):
            degree_trend([1, 2])

    def test_accepts_observed_data(self, toy4):
        assert degree_trend(toy4).n == 4
