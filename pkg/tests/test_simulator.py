import heapq
import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from rdsize.data import check_compatibility, compute_s_full
from rdsize.simulator import (
    SimConfig,
    _unrank_pairs,
    gen_er_graph,
    simulate_rds,
    simulate_study,
)


def per_edge_clock_rds(edges, N, seeds, coupons, lam, n_target, rng):
    """Reference recruitment with one Exp(lam) clock per susceptible edge.

    A clock starts when its holder enters and fires once; firings whose holder
    has run out of coupons or whose target is already recruited are ignored.
    Returns the entry times.
    """
    nbrs = [[] for _ in range(N)]
    for a, b in edges:
        nbrs[a].append(b)
        nbrs[b].append(a)
    recruited = np.zeros(N, dtype=bool)
    left = np.zeros(N, dtype=np.int64)
    clocks, times = [], []

    def enter(v, t):
        recruited[v] = True
        left[v] = coupons
        times.append(t)
        for w in nbrs[v]:
            if not recruited[w]:
                heapq.heappush(clocks, (t + rng.exponential(1 / lam), v, w))

    for v in seeds:
        enter(v, 0.0)
    while clocks and len(times) < n_target:
        t, v, w = heapq.heappop(clocks)
        if recruited[w] or left[v] == 0:
            continue
        left[v] -= 1
        enter(w, t)
    return np.array(times)


@st.composite
def sim_configs(draw):
    N = draw(st.integers(2, 80))
    p = draw(st.floats(0.02, 0.6))
    n = draw(st.integers(1, N))
    seeds = draw(st.integers(1, n))
    return SimConfig(N=N, p=p, n_target=n, n_seeds=seeds, coupons=draw(st.integers(1, 4)),
                     lam=draw(st.floats(0.1, 5.0)),
                     seed_policy=draw(st.sampled_from(["uniform", "degree"])))


class TestConfig:
    @pytest.mark.parametrize("kw", [
        dict(N=10, p=0.0, n_target=5), dict(N=10, p=1.0, n_target=5),
        dict(N=10, p=0.2, n_target=11), dict(N=10, p=0.2, n_target=5, n_seeds=6),
        dict(N=10, p=0.2, n_target=5, coupons=0), dict(N=10, p=0.2, n_target=5, lam=0),
        dict(N=10, p=0.2, n_target=5, seed_policy="hubs"),
    ])
    def test_rejects(self, kw):
        kw.setdefault("n_seeds", 1)
        with pytest.raises(ValueError):
            SimConfig(**kw)

    def test_mean_degree(self):
        assert SimConfig.from_mean_degree(1000, 10, n_target=500).p == pytest.approx(0.01)


class TestGraph:
    def test_single_vertex(self):
        assert gen_er_graph(1, 0.5, np.random.default_rng(0)).shape == (0, 2)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1])
    def test_bad_p(self, p):
        with pytest.raises(ValueError):
            gen_er_graph(10, p, np.random.default_rng(0))

    def test_unrank_small(self):
        pairs = sorted(itertools.combinations(range(30), 2), key=lambda x: (x[1], x[0]))
        got = _unrank_pairs(np.arange(len(pairs)))
        assert [tuple(x) for x in got.tolist()] == pairs

    @given(st.integers(0, 2 ** 52))
    @settings(max_examples=300, deadline=None)
    def test_unrank_large(self, idx):
        i, j = _unrank_pairs(np.array([idx]))[0]
        assert 0 <= i < j
        assert j * (j - 1) // 2 + i == idx

    def test_pairs_distinct_and_ordered(self):
        e = gen_er_graph(500, 0.05, np.random.default_rng(1))
        assert np.all(e[:, 0] < e[:, 1]) and e.max() < 500
        assert np.unique(e[:, 1] * 500 + e[:, 0]).size == e.shape[0]

    def test_edge_count_and_mean_degree(self):
        N, p = 2000, 5 / 2000
        total = N * (N - 1) // 2
        rng = np.random.default_rng(2)
        counts = np.array([gen_er_graph(N, p, rng).shape[0] for _ in range(60)])
        sd = np.sqrt(total * p * (1 - p))
        assert np.all(np.abs(counts - total * p) < 4 * sd)
        assert abs(counts.mean() - total * p) < 4 * sd / np.sqrt(counts.size)
        # mean degree 2E/N has SD 2 sd / N per graph
        mean_deg = 2 * counts / N
        assert abs(mean_deg.mean() - p * (N - 1)) < 4 * (2 * sd / N) / np.sqrt(counts.size)

    def test_degree_distribution(self):
        """Vertex degrees follow Binomial(N - 1, p)."""
        N, p = 3000, 4 / 3000
        e = gen_er_graph(N, p, np.random.default_rng(3))
        deg = np.bincount(e.ravel(), minlength=N)
        k = np.arange(0, 10)
        obs = np.array([np.sum(deg == x) for x in k[:-1]] + [np.sum(deg >= k[-1])])
        pmf = stats.binom.pmf(k[:-1], N - 1, p)
        exp = N * np.append(pmf, 1 - pmf.sum())
        assert stats.chisquare(obs, exp).pvalue > 0.001

    def test_pair_positions_uniform(self):
        N, p = 400, 0.02
        e = gen_er_graph(N, p, np.random.default_rng(4))
        idx = e[:, 1] * (e[:, 1] - 1) // 2 + e[:, 0]
        assert stats.kstest(idx / (N * (N - 1) // 2), "uniform").pvalue > 0.001


class TestRecruitment:
    def test_star_gap_means(self):
        """Centre seed with k coupons: gaps are Exp(lam k), Exp(lam (k - 1)), ..."""
        k, lam, reps = 5, 2.0, 4000
        edges = np.array([[0, v] for v in range(1, k + 1)])
        cfg = SimConfig(N=k + 1, p=0.5, n_target=k + 1, n_seeds=1, coupons=k, lam=lam)
        rng = np.random.default_rng(5)
        gaps = np.array([np.diff(simulate_rds(edges, cfg, rng, seeds=[0]).obs.times)
                         for _ in range(reps)])
        means = lam * np.arange(k, 0, -1)
        expected = 1 / means
        np.testing.assert_array_less(np.abs(gaps.mean(axis=0) - expected),
                                     4 * expected / np.sqrt(reps))
        for g, rate in zip(gaps.T, means):
            assert stats.kstest(g, "expon", args=(0, 1 / rate)).pvalue > 1e-3

    def test_isolated_seeds_die_out(self):
        cfg = SimConfig(N=6, p=0.5, n_target=6, n_seeds=3)
        out = simulate_rds(np.empty((0, 2), dtype=np.int64), cfg, np.random.default_rng(0))
        assert out.died_out and out.n == 3
        assert out.obs.times.tolist() == [0, 0, 0]

    def test_explicit_seeds_validated(self):
        cfg = SimConfig(N=4, p=0.5, n_target=3, n_seeds=1)
        with pytest.raises(ValueError):
            simulate_rds(np.array([[0, 1]]), cfg, np.random.default_rng(0), seeds=[1, 1])

    def test_degree_policy_avoids_isolated(self):
        cfg = SimConfig(N=200, p=0.005, n_target=5, n_seeds=5, seed_policy="degree")
        rng = np.random.default_rng(6)
        for _ in range(20):
            out = simulate_rds(gen_er_graph(cfg.N, cfg.p, rng), cfg, rng)
            assert np.all(out.obs.degrees[out.obs.is_seed] > 0)

    def test_resampling_gives_up(self):
        cfg = SimConfig(N=50, p=1e-4, n_target=20, n_seeds=1)
        with pytest.raises(RuntimeError, match="died out"):
            simulate_study(cfg, np.random.default_rng(0), max_resamples=3)

    def test_resample_count_recorded(self):
        cfg = SimConfig(N=100, p=0.02, n_target=40, n_seeds=1)
        out = simulate_study(cfg, np.random.default_rng(1))
        assert out.n == 40 and not out.died_out and out.resamples >= 0

    def test_truth_json(self, sim_small):
        doc = json.loads(json.dumps(sim_small.truth_dict()))
        assert doc["schema_version"] == 1 and doc["N"] == 300
        assert len(doc["sampled"]) == sim_small.n
        assert doc["susceptible"] == sim_small.susceptible.tolist()

    @given(sim_configs(), st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=150, deadline=None)
    def test_output_invariants(self, cfg, seed):
        rng = np.random.default_rng(seed)
        edges = gen_er_graph(cfg.N, cfg.p, rng)
        out = simulate_rds(edges, cfg, rng)
        obs = out.obs
        assert obs.n == cfg.n_target or out.died_out
        # observed degrees are the true degrees in G
        deg = np.bincount(edges.ravel(), minlength=cfg.N)
        np.testing.assert_array_equal(obs.degrees, deg[out.sampled])
        # recruitment edges are edges of G
        g = {tuple(x) for x in edges.tolist()}
        for a, b in out.sampled[obs.recruitment_edges].tolist():
            assert (min(a, b), max(a, b)) in g
        # true subgraph is the induced one, compatible with the observation
        sub = np.zeros((obs.n, obs.n), dtype=np.uint8)
        pos = {v: k for k, v in enumerate(out.sampled.tolist())}
        for a, b in edges.tolist():
            if a in pos and b in pos:
                sub[pos[a], pos[b]] = sub[pos[b], pos[a]] = 1
        np.testing.assert_array_equal(out.adjacency, sub)
        assert check_compatibility(out.adjacency, obs) == (True, None)
        # time ordering and coupon limits
        assert np.all(obs.times[obs.is_seed] == 0)
        assert np.all(np.diff(obs.times[~obs.is_seed]) > 0)
        assert np.all(obs.recruit_counts <= cfg.coupons)
        # the susceptible-edge formula reproduces the simulator's counts
        u = obs.degrees - out.adjacency.sum(axis=1)
        s, _ = compute_s_full(out.adjacency, obs.coupon_matrix, u, obs.waiting_times)
        np.testing.assert_array_equal(s, out.susceptible)

    def test_memorylessness(self):
        """Aggregated-rate and per-edge-clock recruitment give the same laws of the
        first-event and last-event times."""
        N, p, n, reps = 60, 0.08, 15, 1500
        rng = np.random.default_rng(7)
        edges = gen_er_graph(N, p, rng)
        seeds = [int(v) for v in np.argsort(-np.bincount(edges.ravel(), minlength=N))[:2]]
        cfg = SimConfig(N=N, p=p, n_target=n, n_seeds=2, coupons=2, lam=1.3)
        a_first, a_last, b_first, b_last = [], [], [], []
        for _ in range(reps):
            t = simulate_rds(edges, cfg, rng, seeds=seeds).obs.times
            a_first.append(t[2])
            a_last.append(t[-1] if t.size == n else np.inf)
            t = per_edge_clock_rds(edges, N, seeds, 2, 1.3, n, rng)
            b_first.append(t[2])
            b_last.append(t[-1] if t.size == n else np.inf)
        assert stats.ks_2samp(a_first, b_first).pvalue > 1e-3
        assert stats.ks_2samp(a_last, b_last).pvalue > 1e-3


class TestDegreeOnIndex:
    def test_pendant_counts_have_no_drift(self, sim_medium):
        """Recruitment is degree-biased but the pendant count of the i-th entrant
        is Binomial(N - i, p), whose mean falls linearly with i."""
        from rdsize.data import compute_du
        du, _ = compute_du(sim_medium.adjacency, sim_medium.obs.degrees)
        i = np.arange(1, du.size + 1)
        resid = du - (1000 - i) * 0.01
        assert abs(resid.mean()) < 4 * np.sqrt(9.9 * 0.99 / du.size)
