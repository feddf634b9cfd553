"""Log-likelihood and log-posterior terms for the population size model.

Everything is evaluated in log space; the Beta-function arguments grow like
``n * N`` and overflow quickly otherwise.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .special import log_binom


class DomainError(ValueError):
    """Argument outside the support of a density."""


class ImpossibleRecruitmentError(DomainError):
    """A non-seed recruitment happened with no susceptible edge."""


class ImproperPosteriorError(ValueError):
    """Prior settings give a posterior for N that does not normalize."""


@dataclass(frozen=True)
class Priors:
    """Beta(alpha, beta) on p, Gamma(eta, xi) on lambda, N^-c on N,
    exp(-gamma |E_S|) on the subgraph."""

    alpha: float
    beta: float
    eta: float = 1.0
    xi: float = 1.0
    c: float = 1.0
    gamma: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "beta", "eta", "xi"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if not (self.c >= 0 and math.isfinite(self.c)):
            raise ValueError(f"c must be nonnegative, got {self.c}")
        if not math.isfinite(self.gamma):
            raise ValueError("gamma must be finite")

    @property
    def tail_exponent(self) -> float:
        """The posterior mass of N decays like N^-(alpha + c)."""
        return self.alpha + self.c

    def check_propriety(self, moments: int = 2) -> None:
        """Refuse an improper posterior; warn if the requested posterior
        moments (1 = mean, 2 = variance) may not exist."""
        a = self.tail_exponent
        if a <= 1:
            raise ImproperPosteriorError(
                f"improper posterior (alpha+c <= 1): alpha={self.alpha}, c={self.c}")
        if a <= moments + 1:
            what = "mean" if a <= 2 else "variance"
            warnings.warn(f"alpha+c = {a:g} <= {moments + 1}: posterior {what} may be infinite",
                          RuntimeWarning, stacklevel=2)


def _support_check(N, du):
    du = np.asarray(du)
    room = N - np.arange(1, du.shape[0] + 1) - du
    if np.any(room < 0):
        i = int(np.argmax(room < 0))
        raise DomainError(f"N={N} leaves subject {i} with {du[i]} pendant edges but only "
                          f"{N - i - 1} unrecruited vertices")


def log_lik_N_p(N: int, p: float, du) -> float:
    """Joint log-likelihood of (N, p) given the pendant counts ``du``."""
    if not 0 < p < 1:
        raise DomainError(f"p must lie in (0, 1), got {p}")
    du = np.asarray(du, dtype=np.float64)
    _support_check(N, du)
    size = N - np.arange(1, du.shape[0] + 1)
    return float(np.sum(log_binom(size, du) + du * math.log(p) + (size - du) * math.log1p(-p)))


def log_lik_GS_lambda(s, sw: float, lam: float, seeds) -> float:
    """Log-likelihood of the recruitment times given the susceptible counts.

    ``seeds`` is a boolean mask or a collection of seed indices.
    """
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    s = np.asarray(s)
    mask = np.zeros(s.shape[0], dtype=bool)
    seeds = np.asarray(list(seeds) if not isinstance(seeds, np.ndarray) else seeds)
    if seeds.dtype == bool:
        mask = seeds
    elif seeds.size:
        mask[seeds.astype(int)] = True
    rec = s[~mask]
    if np.any(rec <= 0):
        j = int(np.flatnonzero(~mask)[np.argmax(rec <= 0)])
        raise ImpossibleRecruitmentError(f"recruitment {j} has no susceptible edge")
    return float(np.sum(np.log(lam * rec)) - lam * sw)


def log_posterior_summand(N, state, obs, priors: Priors) -> float:
    """Log of one subgraph's term in the marginal posterior of N."""
    if N < obs.n_min:
        raise DomainError(f"N={N} below the minimum {obs.n_min}")
    X = K.pair_total(obs.n, float(N))
    if X - state.Du + priors.beta <= 0:
        raise DomainError("second Beta-function argument is not positive")
    return K.log_summand(float(N), state.du, state.s, state.sw_cell, state.counts,
                         obs.is_seed, priors.alpha, priors.beta, priors.eta, priors.xi,
                         priors.c, priors.gamma, obs.m)


def log_conditional_N(N: float, state, priors: Priors) -> tuple[float, float, float]:
    """Continuous log conditional of N given the subgraph, with first and
    second derivatives.  Terms depending only on the subgraph are dropped."""
    du = np.asarray(state.du, dtype=np.int64)
    _support_check(N, du)
    Du = float(du.sum())
    value = K.log_cond_N(float(N), du, Du, priors.alpha, priors.beta, priors.c)
    g, h = K.dlog_cond_N(float(N), du, Du, priors.alpha, priors.beta, priors.c)
    return value, g, h
