"""Two-block Gibbs sampler over (subgraph, N).

Each iteration runs ``edge_sweeps`` Metropolis-Hastings edge toggles at fixed
N, then one independence Metropolis-Hastings draw of N from a negative
binomial fitted at the conditional mode.  The heavy loops live in
:mod:`rdsize._kernels`.

The conditional of N given a subgraph has a polynomial right tail, while a
negative binomial fitted to the curvature at the mode has an exponential one.
A chain that wanders into the tail can then reject for thousands of
iterations.  ``tail_weight`` mixes in a size-1 negative binomial with the same
mean to cover the tail; the Metropolis-Hastings ratio uses the mixture mass,
so the target is unchanged.  ``tail_weight=0`` gives the plain fitted proposal.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .data import ObservedData
from .likelihood import DomainError, Priors
from .subgraph import SubgraphState, init_subgraph

log = logging.getLogger(__name__)

MAX_PROPOSAL_TRIES = 10_000

ADD, REMOVE = "add", "remove"


class SamplerError(RuntimeError):
    """The chain hit a numerical failure."""


@dataclass(frozen=True)
class SamplerConfig:
    iterations: int
    burn_in: int = 0
    thin: int = 1
    seed: int = 0
    variance_floor: float = 1.5
    tail_weight: float = 0.1
    chains: int = 1
    edge_sweeps: int | None = None  # default: n per iteration

    def __post_init__(self):
        if self.iterations < 1 or self.thin < 1 or self.chains < 1 or self.burn_in < 0:
            raise ValueError("iterations, thin and chains must be positive; burn_in >= 0")
        if self.burn_in >= self.iterations:
            raise ValueError(
                f"no iterations left after burn-in ({self.burn_in} of {self.iterations})")
        if self.variance_floor <= 1:
            raise ValueError("variance_floor must exceed 1")
        if not 0 <= self.tail_weight < 1:
            raise ValueError("tail_weight must lie in [0, 1)")
        if self.edge_sweeps is not None and self.edge_sweeps < 0:
            raise ValueError("edge_sweeps must be nonnegative")

    @property
    def kept(self) -> int:
        return -(-(self.iterations - self.burn_in) // self.thin)

    def chain_seeds(self) -> list[int]:
        ss = np.random.SeedSequence(self.seed)
        return [int(c.generate_state(1)[0]) for c in ss.spawn(self.chains)]


@dataclass
class PosteriorChain:
    N: np.ndarray
    edges: np.ndarray
    Du: np.ndarray
    log_summand: np.ndarray
    tally: dict
    burn_in: int = 0
    thin: int = 1
    seed: int = 0
    final_state: SubgraphState | None = field(default=None, repr=False)

    def __len__(self):
        return int(self.N.shape[0])

    @property
    def acceptance(self) -> dict:
        t = self.tally

        def rate(a, b):
            return t[a] / t[b] if t[b] else float("nan")

        return {
            "edge_add": rate("add_accepted", "add_proposed"),
            "edge_remove": rate("remove_accepted", "remove_proposed"),
            "N": rate("N_accepted", "N_proposed"),
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "N", "E_S", "D_u", "log_summand"])
            for k in range(len(self)):
                w.writerow([self.burn_in + k * self.thin, int(self.N[k]), int(self.edges[k]),
                            int(self.Du[k]), repr(float(self.log_summand[k]))])


# ---------------------------------------------------------------------------
# per-block steps
# ---------------------------------------------------------------------------


def _seed_from(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**31 - 1))


def _log_table(obs: ObservedData) -> np.ndarray:
    size = int(obs.degrees.sum()) + 2
    tab = np.zeros(size)
    tab[1:] = np.log(np.arange(1, size))
    return tab


class _Arrays:
    """Observation arrays in the layout the kernels expect."""

    def __init__(self, obs: ObservedData):
        self.recruiter = np.ascontiguousarray(obs.recruiter_of)
        self.is_seed = np.ascontiguousarray(obs.is_seed)
        self.exhaust = np.ascontiguousarray(obs.exhaust_index)
        self.times = np.ascontiguousarray(obs.times)
        self.tstar = np.ascontiguousarray(obs.coupon_exhaust_time)
        self.logtab = _log_table(obs)
        self.m = obs.m
        self.n_min = float(obs.n_min)


def edge_move_log_ratio(state: SubgraphState, i: int, j: int, N, obs: ObservedData,
                        priors: Priors) -> float:
    """Closed-form log ratio of conditional subgraph posteriors for toggling
    ``{i, j}``, excluding the proposal correction."""
    i, j = min(i, j), max(i, j)
    kind = K.is_valid_move(i, j, state.A, state.u, obs.recruiter_of)
    if kind == 0:
        raise ValueError(f"({i}, {j}) is not a valid move")
    a = _Arrays(obs)
    return K.edge_log_ratio(i, j, kind == 1, float(N), state.du, state.s, state.sw_cell,
                            state.counts, a.is_seed, a.exhaust, a.times, a.tstar,
                            priors.alpha, priors.beta, priors.eta, priors.xi, priors.gamma,
                            a.m, a.logtab)


def edge_step(state: SubgraphState, N, obs: ObservedData, priors: Priors,
              rng: np.random.Generator) -> tuple[SubgraphState, bool, str | None]:
    """One Metropolis-Hastings toggle, in place.  ``move`` is None for a no-op."""
    a = _Arrays(obs)
    K.seed_rng(_seed_from(rng))
    code = K.edge_step(float(N), state.A, state.u, state.du, state.s, state.sw_cell,
                       state.counts, a.recruiter, a.is_seed, a.exhaust, a.times, a.tstar,
                       priors.alpha, priors.beta, priors.eta, priors.xi, priors.gamma,
                       a.m, a.logtab)
    if code == K.NOOP:
        return state, False, None
    move = ADD if code in (K.ADD_ACCEPT, K.ADD_REJECT) else REMOVE
    return state, code in (K.ADD_ACCEPT, K.REMOVE_ACCEPT), move


def newton_mode_N(state: SubgraphState, priors: Priors, n_min: float,
                  variance_floor: float = 1.5) -> tuple[float, float]:
    """Mode of the continuous conditional of N and the proposal variance."""
    du = np.ascontiguousarray(state.du, dtype=np.int64)
    mean, v, _ = K.proposal_params(du, float(du.sum()), priors.alpha, priors.beta, priors.c,
                                   float(n_min), variance_floor)
    if not math.isfinite(mean):
        raise DomainError("mode search for N failed")
    return mean, v


def n_step(state: SubgraphState, N, priors: Priors, n_min: float, rng: np.random.Generator,
           variance_floor: float = 1.5, tail_weight: float = 0.1) -> tuple[int, bool]:
    du = np.ascontiguousarray(state.du, dtype=np.int64)
    K.seed_rng(_seed_from(rng))
    new, accepted, tries = K.n_step(float(N), du, float(du.sum()), priors.alpha, priors.beta,
                                    priors.c, float(n_min), variance_floor, tail_weight,
                                    MAX_PROPOSAL_TRIES)
    if tries < 0:
        raise SamplerError(f"no proposal >= N_min={n_min} in {MAX_PROPOSAL_TRIES} draws")
    return int(new), bool(accepted)


# ---------------------------------------------------------------------------
# chains
# ---------------------------------------------------------------------------

_TALLY = ("add_proposed", "add_accepted", "remove_proposed", "remove_accepted", "noop",
          "N_proposed", "N_accepted")


def run_chain(obs: ObservedData, priors: Priors, config: SamplerConfig, seed: int,
              state: SubgraphState | None = None, N0: float | None = None) -> PosteriorChain:
    state = init_subgraph(obs) if state is None else state.copy()
    a = _Arrays(obs)
    sweeps = obs.n if config.edge_sweeps is None else config.edge_sweeps
    if N0 is None:
        N0, _ = newton_mode_N(state, priors, a.n_min, config.variance_floor)
        N0 = float(max(a.n_min, round(N0)))
    kept = config.kept
    out_N = np.empty(kept)
    out_E = np.empty(kept, dtype=np.int64)
    out_Du = np.empty(kept, dtype=np.int64)
    out_ls = np.empty(kept)
    tally = np.zeros(len(_TALLY), dtype=np.int64)
    got = K.run_chain(seed, config.iterations, config.burn_in, config.thin, sweeps, float(N0),
                      a.n_min, state.A, state.u, state.du, state.s, state.sw_cell,
                      state.counts, a.recruiter, a.is_seed, a.exhaust, a.times, a.tstar,
                      priors.alpha, priors.beta, priors.eta, priors.xi, priors.c,
                      priors.gamma, a.m, config.variance_floor, config.tail_weight,
                      MAX_PROPOSAL_TRIES,
                      a.logtab, out_N, out_E, out_Du, out_ls, tally)
    if got < 0:
        raise SamplerError(f"no proposal >= N_min={a.n_min} in {MAX_PROPOSAL_TRIES} draws")
    chain = PosteriorChain(out_N.astype(np.int64), out_E, out_Du, out_ls,
                           dict(zip(_TALLY, (int(x) for x in tally))),
                           burn_in=config.burn_in, thin=config.thin, seed=seed,
                           final_state=state)
    log.debug("chain seed=%d acceptance=%s", seed, chain.acceptance)
    return chain


def run_gibbs(obs: ObservedData, priors: Priors, config: SamplerConfig,
              workers: int | None = None) -> list[PosteriorChain]:
    """Run ``config.chains`` independent chains, each from the minimal subgraph."""
    priors.check_propriety()
    seeds = config.chain_seeds()
    if config.chains == 1:
        return [run_chain(obs, priors, config, seeds[0])]
    with ThreadPoolExecutor(max_workers=workers or config.chains) as pool:
        return list(pool.map(lambda s: run_chain(obs, priors, config, s), seeds))


def conditional_N_trace(state: SubgraphState, N0, priors: Priors, n_min: float, steps: int,
                        rng: np.random.Generator, variance_floor: float = 1.5,
                        tail_weight: float = 0.1) -> np.ndarray:
    """N-only chain at a frozen subgraph."""
    du = np.ascontiguousarray(state.du, dtype=np.int64)
    return K.n_chain(_seed_from(rng), steps, float(N0), du, float(du.sum()), priors.alpha,
                     priors.beta, priors.c, float(n_min), variance_floor, tail_weight,
                     MAX_PROPOSAL_TRIES)


def subgraph_trace(state: SubgraphState, N, obs: ObservedData, priors: Priors, steps: int,
                   rng: np.random.Generator, pairs) -> np.ndarray:
    """Edge-only chain at fixed N; each visited subgraph encoded as a bitmask
    over ``pairs`` (at most 62)."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if pairs.shape[0] > 62:
        raise ValueError("too many pairs to encode")
    a = _Arrays(obs)
    return K.edge_chain_codes(_seed_from(rng), steps, float(N), state.A, state.u, state.du,
                              state.s, state.sw_cell, state.counts, a.recruiter, a.is_seed,
                              a.exhaust, a.times, a.tstar, priors.alpha, priors.beta,
                              priors.eta, priors.xi, priors.gamma, a.m, a.logtab,
                              np.ascontiguousarray(pairs[:, 0]),
                              np.ascontiguousarray(pairs[:, 1]))
