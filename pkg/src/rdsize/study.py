"""Replicated simulate-then-estimate runs for checking the estimator."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import ObservedData
from .elicitation import moment_match_priors
from .likelihood import Priors
from .sampler import SamplerConfig, run_chain
from .simulator import SimConfig, SimOutput, simulate_study


@dataclass
class StudyResult:
    N_true: int
    posterior_means: np.ndarray
    posterior_sds: np.ndarray
    resamples: np.ndarray

    @property
    def mean_of_means(self) -> float:
        return float(self.posterior_means.mean())

    @property
    def sd_of_means(self) -> float:
        return float(self.posterior_means.std(ddof=1))

    @property
    def relative_bias(self) -> float:
        return (self.mean_of_means - self.N_true) / self.N_true


def replicate_rngs(master_seed: int, replicates: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s)
            for s in np.random.SeedSequence(master_seed).spawn(replicates)]


def simulate_replicates(config: SimConfig, replicates: int, master_seed: int) -> list[SimOutput]:
    return [simulate_study(config, rng) for rng in replicate_rngs(master_seed, replicates)]


def truth_centred_priors(sim: SimConfig, alpha: float, v_lambda: float = 1.0,
                  c: float = 1.0) -> Priors:
    """Priors centred on the simulation truth."""
    return moment_match_priors(sim.p, sim.lam, alpha, v_lambda=v_lambda, c=c)


def estimate_replicates(datasets: list[ObservedData], priors: Priors | Callable,
                        config: SamplerConfig, N_true: int,
                        resamples=None) -> StudyResult:
    """Posterior mean and SD of N for each dataset, one chain each."""
    seeds = np.random.SeedSequence(config.seed).spawn(len(datasets))
    means, sds = [], []
    for obs, ss in zip(datasets, seeds):
        pr = priors(obs) if callable(priors) else priors
        chain = run_chain(obs, pr, config, int(ss.generate_state(1)[0]))
        means.append(chain.N.mean())
        sds.append(chain.N.std(ddof=1))
    res = np.zeros(len(datasets), dtype=np.int64) if resamples is None else np.asarray(resamples)
    return StudyResult(N_true, np.array(means), np.array(sds), res)
