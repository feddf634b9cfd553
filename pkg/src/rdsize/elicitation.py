"""Prior construction helpers and the degree-trend diagnostic."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .data import ObservedData
from .likelihood import DomainError, Priors
from .special import betainc


def _pairs(n: int, N: float) -> float:
    return n * N - n * (n + 1) / 2


def p_lower_bound(obs: ObservedData, N_hat: float) -> float:
    """Lower bound on the edge density implied by a prior guess of N.

    Subject i (1-based) has at least ``max(r_i, d_i - i + 1)`` pendant edges
    when recruited: its own recruits, and all but the i - 1 earlier entrants.
    """
    denom = _pairs(obs.n, N_hat)
    if denom <= 0:
        raise DomainError(f"N_hat={N_hat} too small for n={obs.n}")
    i = np.arange(1, obs.n + 1)
    return float(np.maximum(obs.recruit_counts, obs.degrees - i + 1).sum() / denom)


def solve_beta_tail(alpha: float, p_lo: float, level: float = 0.99) -> float:
    """Beta parameter with ``P(p > p_lo | alpha, beta) = level``.

    I_x(alpha, beta) increases in beta, so bisection on log(beta) finds the
    unique root.
    """
    if not alpha > 0 or not 0 < p_lo < 1 or not 0 < level < 1:
        raise ValueError("need alpha > 0, 0 < p_lo < 1 and 0 < level < 1")
    target = 1.0 - level

    def f(logb):
        return betainc(alpha, math.exp(logb), p_lo) - target

    lo, hi = math.log(1e-6), math.log(1e12)
    while f(lo) > 0:
        lo -= 10.0
    while f(hi) < 0:
        hi += 10.0
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return math.exp(0.5 * (lo + hi))


def gamma_for(p: float) -> float:
    """Subgraph edge penalty matching Erdos-Renyi edge odds p / (1 - p)."""
    return -math.log(p / (1 - p))


def moment_match_priors(p: float, lam: float, alpha: float, v_lambda: float = 1.0,
                        c: float = 1.0) -> Priors:
    """Priors centred on (p, lam): Beta mean p, Gamma mean lam and variance v_lambda."""
    if not 0 < p < 1 or not lam > 0 or not alpha > 0 or not v_lambda > 0:
        raise ValueError("need 0 < p < 1 and positive lam, alpha, v_lambda")
    return Priors(alpha=alpha, beta=alpha * (1 - p) / p, eta=lam * lam / v_lambda,
                  xi=lam / v_lambda, c=c, gamma=gamma_for(p))


def n_tilde(du, p_bar: float) -> float:
    """Moment estimate of N from the pendant counts and a mean edge density."""
    du = np.asarray(du)
    n = du.shape[0]
    if not p_bar > 0:
        raise DomainError("p_bar must be positive")
    return (n + 1) / 2 + du.sum() / (p_bar * n)


def p_tilde(du, N: float) -> float:
    """Moment estimate of the edge density from the pendant counts and N."""
    du = np.asarray(du)
    denom = _pairs(du.shape[0], N)
    if denom <= 0:
        raise DomainError(f"N={N} too small for n={du.shape[0]}")
    return float(du.sum() / denom)


@dataclass(frozen=True)
class DegreeTrend:
    slope: float
    se: float
    p_value: float
    n: int
    excluded: int = 0

    @property
    def se_defined(self) -> bool:
        return math.isfinite(self.se)


def degree_trend(obs_or_degrees, exclude_above: float | None = None) -> DegreeTrend:
    """Least-squares slope of degree against recruitment index, with a
    two-sided t-test.  ``exclude_above`` drops subjects reporting a larger
    degree."""
    d = (obs_or_degrees.degrees if isinstance(obs_or_degrees, ObservedData)
         else np.asarray(obs_or_degrees)).astype(np.float64)
    idx = np.arange(1, d.shape[0] + 1, dtype=np.float64)
    keep = np.ones(d.shape[0], dtype=bool) if exclude_above is None else d <= exclude_above
    d, idx = d[keep], idx[keep]
    if d.shape[0] < 3:
        raise ValueError("degree trend needs at least 3 subjects")
    dropped = int((~keep).sum())
    if np.ptp(d) == 0:
        return DegreeTrend(0.0, float("nan"), float("nan"), d.shape[0], dropped)
    fit = stats.linregress(idx, d)
    return DegreeTrend(float(fit.slope), float(fit.stderr), float(fit.pvalue), d.shape[0],
                       dropped)
