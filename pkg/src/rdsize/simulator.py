"""Erdos-Renyi population graphs and continuous-time RDS recruitment on them."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import ObservedData

UNIFORM, DEGREE = "uniform", "degree"


@dataclass(frozen=True)
class SimConfig:
    N: int
    p: float
    n_target: int
    n_seeds: int = 10
    coupons: int = 3
    lam: float = 1.0
    seed_policy: str = UNIFORM

    def __post_init__(self):
        if self.N < 1 or not 0 < self.p < 1:
            raise ValueError("need N >= 1 and 0 < p < 1")
        if not 1 <= self.n_seeds <= self.n_target <= self.N:
            raise ValueError("need 1 <= n_seeds <= n_target <= N")
        if self.coupons < 1 or not self.lam > 0:
            raise ValueError("need coupons >= 1 and lam > 0")
        if self.seed_policy not in (UNIFORM, DEGREE):
            raise ValueError(f"unknown seed policy {self.seed_policy!r}")

    @classmethod
    def from_mean_degree(cls, N, mean_degree, **kw) -> "SimConfig":
        return cls(N=N, p=mean_degree / N, **kw)


@dataclass(eq=False)
class SimOutput:
    obs: ObservedData
    N: int
    p: float
    lam: float
    edges: np.ndarray            # population graph, (E, 2) with i < j
    sampled: np.ndarray          # population label of each subject, in entry order
    adjacency: np.ndarray        # true recruitment-induced subgraph
    susceptible: np.ndarray      # susceptible-edge count just before each entry
    died_out: bool
    resamples: int = field(default=0)

    @property
    def n(self) -> int:
        return self.obs.n

    def truth_dict(self) -> dict:
        i, j = np.nonzero(np.triu(self.adjacency))
        return {
            "schema_version": 1,
            "N": int(self.N),
            "p": float(self.p),
            "lambda": float(self.lam),
            "n": self.n,
            "died_out": bool(self.died_out),
            "resamples": int(self.resamples),
            "population_edges": int(self.edges.shape[0]),
            "sampled": [int(v) for v in self.sampled],
            "subgraph_edges": [[int(a), int(b)] for a, b in zip(i, j)],
            "susceptible": [int(x) for x in self.susceptible],
        }


def _unrank_pairs(idx: np.ndarray) -> np.ndarray:
    """Map linear indices over {(i, j): i < j} (ordered by j, then i) to pairs."""
    j = np.floor((1 + np.sqrt(1 + 8 * idx.astype(np.float64))) / 2).astype(np.int64)
    # correct the float estimate
    j -= (j * (j - 1) // 2) > idx
    j += ((j + 1) * j // 2) <= idx
    i = idx - j * (j - 1) // 2
    return np.column_stack([i, j])


def gen_er_graph(N: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """Edge list of G(N, p) by geometric skipping over the pair index."""
    if N < 1 or not 0 < p < 1:
        raise ValueError("need N >= 1 and 0 < p < 1")
    total = N * (N - 1) // 2
    if total == 0:
        return np.empty((0, 2), dtype=np.int64)
    chunks = []
    pos = -1
    batch = max(16, int(1.2 * total * p) + 16)
    while True:
        steps = rng.geometric(p, size=batch)
        idx = pos + np.cumsum(steps)
        stop = idx >= total
        if stop.any():
            chunks.append(idx[: int(np.argmax(stop))])
            break
        chunks.append(idx)
        pos = int(idx[-1])
    return _unrank_pairs(np.concatenate(chunks))


def _neighbours(edges: np.ndarray, N: int) -> list[np.ndarray]:
    if edges.size == 0:
        return [np.empty(0, dtype=np.int64) for _ in range(N)]
    both = np.concatenate([edges, edges[:, ::-1]])
    both = both[np.argsort(both[:, 0], kind="stable")]
    cuts = np.searchsorted(both[:, 0], np.arange(N + 1))
    return [both[cuts[v]:cuts[v + 1], 1] for v in range(N)]


def simulate_rds(edges: np.ndarray, config: SimConfig, rng: np.random.Generator,
                 seeds=None) -> SimOutput:
    """Gillespie simulation of coupon-limited recruitment over ``edges``.

    Seeds enter one after another at time 0.  Every edge between a
    coupon-holding participant and a not-yet-recruited vertex carries an
    independent Exp(lam) clock; the next recruitment follows the first clock to
    ring, so the waiting time is Exp(lam * S) and the edge is uniform among the
    S susceptible ones.  ``seeds`` fixes the seed vertices instead of drawing
    them under ``config.seed_policy``.
    """
    N = config.N
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    nbrs = _neighbours(edges, N)
    degree = np.array([a.shape[0] for a in nbrs], dtype=np.int64)

    if seeds is not None:
        seeds = np.asarray(seeds, dtype=np.int64)
        if seeds.size == 0 or np.unique(seeds).size != seeds.size or not (
                0 <= seeds.min() and seeds.max() < N):
            raise ValueError("seeds must be distinct vertices of the graph")
    elif config.seed_policy == DEGREE and degree.sum() > 0:
        w = degree / degree.sum()
        k = min(config.n_seeds, int(np.count_nonzero(w)))
        seeds = rng.choice(N, size=k, replace=False, p=w)
    else:
        seeds = rng.choice(N, size=config.n_seeds, replace=False)

    recruited = np.zeros(N, dtype=bool)
    free = degree.copy()          # unrecruited neighbours of each vertex
    left = np.zeros(N, dtype=np.int64)
    order, recruiter, times, susceptible = [], [], [], []
    position = {}

    def holders_weight():
        h = np.array(order, dtype=np.int64)
        if h.size == 0:
            return h, h
        h = h[left[h] > 0]
        return h, free[h]

    def enter(v, by, t, S):
        susceptible.append(S)
        position[v] = len(order)
        order.append(v)
        recruiter.append(by)
        times.append(t)
        recruited[v] = True
        free[nbrs[v]] -= 1
        left[v] = config.coupons

    for v in seeds:
        enter(int(v), -1, 0.0, int(holders_weight()[1].sum()))

    t = 0.0
    died = False
    while len(order) < config.n_target:
        h, wts = holders_weight()
        S = int(wts.sum())
        if S == 0:
            died = True
            break
        t += rng.exponential(1.0 / (config.lam * S))
        r = int(h[rng.choice(h.size, p=wts / S)])
        cand = nbrs[r][~recruited[nbrs[r]]]
        v = int(cand[rng.integers(cand.size)])
        left[r] -= 1
        enter(v, position[r], t, S)

    sampled = np.array(order, dtype=np.int64)
    n = sampled.size
    pos = np.full(N, -1, dtype=np.int64)
    pos[sampled] = np.arange(n)
    A = np.zeros((n, n), dtype=np.uint8)
    if edges.size:
        e = pos[edges]
        e = e[(e >= 0).all(axis=1)]
        A[e[:, 0], e[:, 1]] = 1
        A[e[:, 1], e[:, 0]] = 1
    obs = ObservedData(
        recruiter_of=recruiter,
        degrees=degree[sampled],
        times=times,
        coupons_issued=np.full(n, config.coupons),
        ids=tuple(f"v{v}" for v in sampled),
    )
    return SimOutput(obs, N, config.p, config.lam, edges, sampled, A,
                     np.array(susceptible, dtype=np.int64), died)


def simulate_study(config: SimConfig, rng: np.random.Generator,
                   max_resamples: int = 1000) -> SimOutput:
    """Draw graph and recruitment, redrawing both until ``n_target`` is reached."""
    for k in range(max_resamples + 1):
        edges = gen_er_graph(config.N, config.p, rng)
        out = simulate_rds(edges, config, rng)
        if not out.died_out:
            out.resamples = k
            return out
    raise RuntimeError(f"recruitment died out {max_resamples + 1} times")
