"""Scalar special functions used by the likelihood and prior elicitation.

Digamma and trigamma lift the argument above 10 by recurrence and finish with
the asymptotic series; they are the same compiled routines the sampler uses.
"""

import math

import numpy as np
from scipy import special as _sp

from . import _kernels as K

lgamma = math.lgamma


def digamma(x: float) -> float:
    if not x > 0:
        raise ValueError(f"digamma needs x > 0, got {x}")
    return K.digamma(float(x))


def trigamma(x: float) -> float:
    if not x > 0:
        raise ValueError(f"trigamma needs x > 0, got {x}")
    return K.trigamma(float(x))


def log_beta(a: float, b: float) -> float:
    if not (a > 0 and b > 0):
        raise ValueError(f"log-Beta needs positive arguments, got ({a}, {b})")
    return K.log_beta(float(a), float(b))


def log_binom(a, k):
    """log C(a, k) for real ``a >= k >= 0``, elementwise."""
    a = np.asarray(a, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    return _sp.gammaln(a + 1) - _sp.gammaln(k + 1) - _sp.gammaln(a - k + 1)


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    return float(_sp.betainc(a, b, x))
