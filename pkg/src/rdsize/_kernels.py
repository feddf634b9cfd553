"""Compiled inner loops shared by the likelihood, subgraph and sampler modules.

Everything here works on plain arrays so it can run under numba's nopython
mode.  Subjects are 0-based; subject ``i`` here is subject ``i + 1`` in the
usual 1-based notation, which is why ``N - i - 1`` appears where a binomial
index ``N - i`` would be expected.

Row ``i`` of the coupon matrix is the contiguous run of events
``i < k <= exhaust[i]``, so all coupon-matrix access goes through ``exhaust``.
"""

import math

import numpy as np
from numba import njit

# slots of the integer ``counts`` array carried by a subgraph state
DU, EDGES, ADDABLE, REMOVABLE = 0, 1, 2, 3

# edge-step outcome codes
NOOP, ADD_ACCEPT, ADD_REJECT, REMOVE_ACCEPT, REMOVE_REJECT = 0, 1, 2, 3, 4

_LIFT = 10.0


@njit(cache=True)
def digamma(x):
    if x <= 0.0 or not math.isfinite(x):
        return np.nan
    acc = 0.0
    while x < _LIFT:
        acc -= 1.0 / x
        x += 1.0
    f = 1.0 / (x * x)
    tail = f * (-1.0 / 12.0 + f * (1.0 / 120.0 + f * (-1.0 / 252.0 + f * (
        1.0 / 240.0 + f * (-1.0 / 132.0 + f * (691.0 / 32760.0 + f * (-1.0 / 12.0)))))))
    return acc + math.log(x) - 0.5 / x + tail


@njit(cache=True)
def trigamma(x):
    if x <= 0.0 or not math.isfinite(x):
        return np.nan
    acc = 0.0
    while x < _LIFT:
        acc += 1.0 / (x * x)
        x += 1.0
    z = 1.0 / x
    f = z * z
    tail = z * f * (1.0 / 6.0 + f * (-1.0 / 30.0 + f * (1.0 / 42.0 + f * (
        -1.0 / 30.0 + f * (5.0 / 66.0 + f * (-691.0 / 2730.0 + f * (7.0 / 6.0)))))))
    return acc + z + 0.5 * f + tail


@njit(cache=True)
def _stirling_tail(x):
    """lgamma(x) minus its Stirling approximation, for x >= 10."""
    z = 1.0 / x
    f = z * z
    return z * (1.0 / 12.0 + f * (-1.0 / 360.0 + f * (1.0 / 1260.0 + f * (
        -1.0 / 1680.0 + f * (1.0 / 1188.0)))))


@njit(cache=True)
def lgamma_diff(x, a):
    """lgamma(x + a) - lgamma(x) for x > 0, a >= 0.

    For large x the two log-gamma values are huge and nearly equal; expanding
    both with Stirling's series cancels the leading terms analytically.
    """
    if x < _LIFT:
        return math.lgamma(x + a) - math.lgamma(x)
    y = x + a
    return ((x - 0.5) * math.log1p(a / x) + a * math.log(y) - a
            + _stirling_tail(y) - _stirling_tail(x))


@njit(cache=True)
def lgamma_delta(x, y):
    """lgamma(y) - lgamma(x) for positive x, y."""
    if y >= x:
        return lgamma_diff(x, y - x)
    return -lgamma_diff(y, x - y)


@njit(cache=True)
def log_beta(a, b):
    if b >= a:
        return math.lgamma(a) - lgamma_diff(b, a)
    return math.lgamma(b) - lgamma_diff(a, b)


@njit(cache=True)
def pair_total(n, N):
    """Sum over subjects of the binomial sizes, ``n*N - n(n+1)/2``."""
    return n * N - 0.5 * n * (n + 1)


# ---------------------------------------------------------------------------
# conditional posterior of N given a subgraph
# ---------------------------------------------------------------------------


@njit(cache=True)
def log_cond_N(N, du, Du, alpha, beta, c):
    n = du.shape[0]
    acc = 0.0
    for i in range(n):
        a = N - i - 1.0
        d = du[i]
        if d > 0:
            acc += lgamma_diff(a - d + 1.0, d) - math.lgamma(d + 1.0)
    X = pair_total(n, N)
    acc += log_beta(Du + alpha, X - Du + beta)
    return acc - c * math.log(N)


@njit(cache=True)
def dlog_cond_N(N, du, Du, alpha, beta, c):
    n = du.shape[0]
    g = 0.0
    h = 0.0
    for i in range(n):
        d = du[i]
        if d > 0:
            a = N - i
            g += digamma(a) - digamma(a - d)
            h += trigamma(a) - trigamma(a - d)
    X = pair_total(n, N)
    g += n * (digamma(X - Du + beta) - digamma(X + alpha + beta)) - c / N
    h += n * n * (trigamma(X - Du + beta) - trigamma(X + alpha + beta)) + c / (N * N)
    return g, h


@njit(cache=True)
def mode_N(du, Du, alpha, beta, c, n_min):
    """Mode of the continuous conditional and the curvature there.

    Newton on the score, kept inside a bracket that is grown by doubling and
    shrunk by the sign of the score; a Newton step leaving the bracket is
    replaced by bisection.
    """
    n = du.shape[0]
    g, h = dlog_cond_N(n_min, du, Du, alpha, beta, c)
    if g <= 0.0:
        return n_min, h, 0
    lo = n_min
    hi = max(2.0 * n_min, 2.0 * n)
    while True:
        gh, _ = dlog_cond_N(hi, du, Du, alpha, beta, c)
        if gh < 0.0 or hi > 1e15:
            break
        lo = hi
        hi *= 2.0
    x = min(max(max(n_min, 2.0 * n), lo), hi)
    for it in range(200):
        g, h = dlog_cond_N(x, du, Du, alpha, beta, c)
        if g > 0.0:
            lo = x
        else:
            hi = x
        xn = 0.5 * (lo + hi)
        if h < 0.0:
            cand = x - g / h
            if lo < cand < hi:
                xn = cand
        if abs(xn - x) <= 1e-10 * x or hi - lo <= 1e-12 * hi:
            x = xn
            break
        x = xn
    g, h = dlog_cond_N(x, du, Du, alpha, beta, c)
    return x, h, it + 1


# ---------------------------------------------------------------------------
# subgraph state maintenance
# ---------------------------------------------------------------------------


@njit(cache=True)
def sw_shift(i, j, times, tstar):
    """Susceptible edge-time carried by the pendant stubs of ``i`` and ``j``
    that a new edge ``{i, j}`` (``i < j``) absorbs."""
    ti = tstar[i]
    return (ti - min(times[j], ti)) + (tstar[j] - times[j])


@njit(cache=True)
def add_pair_counts(i, j, A, u):
    """Non-neighbours of ``i`` and of ``j`` (excluding each other) with free stubs."""
    n = u.shape[0]
    ci = 0
    cj = 0
    for k in range(n):
        if k == i or k == j or u[k] <= 0:
            continue
        if A[i, k] == 0:
            ci += 1
        if A[j, k] == 0:
            cj += 1
    return ci, cj


@njit(cache=True)
def addable_after(i, j, adding, A, u, ci, cj):
    """Change in the number of addable pairs caused by toggling ``{i, j}``."""
    ui = u[i]
    uj = u[j]
    aij = A[i, j]
    before = (ci if ui > 0 else 0) + (cj if uj > 0 else 0)
    if ui > 0 and uj > 0 and aij == 0:
        before += 1
    if adding:
        ui -= 1
        uj -= 1
        aij = 1
    else:
        ui += 1
        uj += 1
        aij = 0
    after = (ci if ui > 0 else 0) + (cj if uj > 0 else 0)
    if ui > 0 and uj > 0 and aij == 0:
        after += 1
    return after - before


@njit(cache=True)
def apply_toggle(i, j, adding, A, u, du, s, sw, counts, exhaust, times, tstar):
    """Toggle ``{i, j}`` (``i < j``) and update every cached statistic."""
    ci, cj = add_pair_counts(i, j, A, u)
    counts[ADDABLE] += addable_after(i, j, adding, A, u, ci, cj)
    sign = -1 if adding else 1
    A[i, j] = 1 if adding else 0
    A[j, i] = A[i, j]
    u[i] += sign
    u[j] += sign
    du[j] += sign
    counts[DU] += sign
    counts[EDGES] -= sign
    counts[REMOVABLE] -= sign
    ei = exhaust[i]
    ej = exhaust[j]
    for k in range(j + 1, max(ei, ej) + 1):
        if k <= ei:
            s[k] += sign
        if k <= ej:
            s[k] += sign
    sw[0] += sign * sw_shift(i, j, times, tstar)


@njit(cache=True)
def edge_log_ratio(i, j, adding, N, du, s, sw, counts, is_seed, exhaust, times, tstar,
                   alpha, beta, eta, xi, gamma, n_seeds, logtab):
    """Closed-form log target ratio for toggling ``{i, j}`` with ``i < j``.

    All quantities are the pre-move values; ``j`` is the later recruit.
    """
    n = du.shape[0]
    sign = -1 if adding else 1
    ei = exhaust[i]
    ej = exhaust[j]
    ls = 0.0
    for k in range(j + 1, max(ei, ej) + 1):
        if is_seed[k]:
            continue
        delta = 0
        if k <= ei:
            delta += 1
        if k <= ej:
            delta += 1
        new = s[k] + sign * delta
        if new <= 0:
            return -np.inf
        ls += logtab[new] - logtab[s[k]]
    shift = sw_shift(i, j, times, tstar)
    sw_new = sw[0] + sign * shift
    ls += (n - n_seeds + eta) * (math.log(sw[0] + xi) - math.log(sw_new + xi))
    Du = counts[DU]
    d = du[j]
    X = pair_total(n, N)
    if adding:
        ls += math.log(d) - math.log(N - j - d)
        ls += math.log(X - Du + beta) - math.log(Du - 1.0 + alpha)
        ls -= gamma
    else:
        ls += math.log(N - j - 1.0 - d) - math.log(d + 1.0)
        ls += math.log(Du + alpha) - math.log(X - Du - 1.0 + beta)
        ls += gamma
    return ls


@njit(cache=True)
def is_valid_move(i, j, A, u, recruiter):
    """0 if ``{i, j}`` (``i < j``) is not a valid move, 1 for add, 2 for remove."""
    if A[i, j] == 0:
        if u[i] > 0 and u[j] > 0:
            return 1
        return 0
    if recruiter[j] == i:
        return 0
    return 2


@njit(cache=True)
def draw_move(A, u, recruiter, total):
    """Uniform draw from the valid add/remove moves (``total`` of them)."""
    n = u.shape[0]
    npairs = n * (n - 1) // 2
    if npairs > 50 * total:
        target = np.random.randint(total)
        seen = 0
        for j in range(1, n):
            for i in range(j):
                kind = is_valid_move(i, j, A, u, recruiter)
                if kind:
                    if seen == target:
                        return i, j, kind
                    seen += 1
        return -1, -1, 0
    while True:
        a = np.random.randint(n)
        b = np.random.randint(n)
        if a == b:
            continue
        i = min(a, b)
        j = max(a, b)
        kind = is_valid_move(i, j, A, u, recruiter)
        if kind:
            return i, j, kind


@njit(cache=True)
def edge_step(N, A, u, du, s, sw, counts, recruiter, is_seed, exhaust, times, tstar,
              alpha, beta, eta, xi, gamma, n_seeds, logtab):
    total = counts[ADDABLE] + counts[REMOVABLE]
    if total <= 0:
        return NOOP
    i, j, kind = draw_move(A, u, recruiter, total)
    adding = kind == 1
    lr = edge_log_ratio(i, j, adding, N, du, s, sw, counts, is_seed, exhaust, times, tstar,
                        alpha, beta, eta, xi, gamma, n_seeds, logtab)
    ci, cj = add_pair_counts(i, j, A, u)
    new_total = total + addable_after(i, j, adding, A, u, ci, cj) + (1 if adding else -1)
    lr += math.log(total) - math.log(new_total)
    if lr >= 0.0 or math.log(np.random.random()) < lr:
        apply_toggle(i, j, adding, A, u, du, s, sw, counts, exhaust, times, tstar)
        return ADD_ACCEPT if adding else REMOVE_ACCEPT
    return ADD_REJECT if adding else REMOVE_REJECT


# ---------------------------------------------------------------------------
# N given the subgraph
# ---------------------------------------------------------------------------

_POISSON_SIZE = 1e10
# size of the heavy-tailed proposal component (geometric-like tail)
TAIL_SIZE = 1.0


@njit(cache=True)
def nb_log_ratio(k_from, k_to, mean, size):
    """log q(k_from) - log q(k_to) for the untruncated proposal mass."""
    if size > _POISSON_SIZE:
        return (k_from - k_to) * math.log(mean) - math.lgamma(k_from + 1.0) + math.lgamma(k_to + 1.0)
    return (lgamma_delta(size + k_to, size + k_from) - lgamma_delta(k_to + 1.0, k_from + 1.0)
            + (k_from - k_to) * math.log(mean / (size + mean)))


@njit(cache=True)
def proposal_params(du, Du, alpha, beta, c, n_min, floor):
    mean, h, _ = mode_N(du, Du, alpha, beta, c, n_min)
    # a boundary mode can sit where the log conditional is still convex; then
    # -1/h carries no scale information and the floor applies
    v = -1.0 / h if h < 0.0 else 0.0
    if not (v > mean):
        v = max(v, floor * mean)
    return mean, v, mean * mean / (v - mean)


@njit(cache=True)
def nb_log_pmf(k, mean, size):
    """Log mass of the negative binomial with the given mean and size."""
    if size > _POISSON_SIZE:
        return k * math.log(mean) - mean - math.lgamma(k + 1.0)
    return (lgamma_diff(size, k) - math.lgamma(k + 1.0)
            + size * math.log(size / (size + mean)) + k * math.log(mean / (size + mean)))


@njit(cache=True)
def mix_log_pmf(k, mean, size, tail_w):
    a = math.log1p(-tail_w) + nb_log_pmf(k, mean, size)
    b = math.log(tail_w) + nb_log_pmf(k, mean, TAIL_SIZE)
    top = max(a, b)
    return top + math.log(math.exp(a - top) + math.exp(b - top))


@njit(cache=True)
def proposal_log_ratio(k_from, k_to, mean, size, tail_w):
    """log q(k_from) - log q(k_to) for the (possibly mixed) untruncated proposal."""
    if tail_w <= 0.0:
        return nb_log_ratio(k_from, k_to, mean, size)
    return mix_log_pmf(k_from, mean, size, tail_w) - mix_log_pmf(k_to, mean, size, tail_w)


@njit(cache=True)
def draw_nb(mean, size):
    if size > _POISSON_SIZE:
        return np.random.poisson(mean)
    return np.random.poisson(np.random.gamma(size, mean / size))


@njit(cache=True)
def n_step(N, du, Du, alpha, beta, c, n_min, floor, tail_w, max_tries):
    """Returns (new N, accepted flag, resample count); count -1 flags failure.

    With probability ``tail_w`` the candidate comes from a size-1 negative
    binomial with the same mean, whose tail reaches far beyond the fitted one.
    """
    mean, v, size = proposal_params(du, Du, alpha, beta, c, n_min, floor)
    tries = 0
    while True:
        if tail_w > 0.0 and np.random.random() < tail_w:
            cand = draw_nb(mean, TAIL_SIZE)
        else:
            cand = draw_nb(mean, size)
        if cand >= n_min:
            break
        tries += 1
        if tries >= max_tries:
            return N, False, -1
    cand_f = float(cand)
    if cand_f == N:
        return N, True, tries
    lr = log_cond_N(cand_f, du, Du, alpha, beta, c) - log_cond_N(N, du, Du, alpha, beta, c)
    lr += proposal_log_ratio(N, cand_f, mean, size, tail_w)
    if lr >= 0.0 or math.log(np.random.random()) < lr:
        return cand_f, True, tries
    return N, False, tries


# ---------------------------------------------------------------------------
# full log summand and chain drivers
# ---------------------------------------------------------------------------


@njit(cache=True)
def log_summand(N, du, s, sw, counts, is_seed, alpha, beta, eta, xi, c, gamma, n_seeds):
    n = du.shape[0]
    acc = 0.0
    for k in range(n):
        if not is_seed[k]:
            if s[k] <= 0:
                return -np.inf
            acc += math.log(s[k])
    acc -= (n - n_seeds + eta) * math.log(sw[0] + xi)
    acc += log_cond_N(N, du, counts[DU], alpha, beta, c)
    return acc - gamma * counts[EDGES]


@njit(cache=True)
def seed_rng(seed):
    np.random.seed(seed)


@njit(cache=True, nogil=True)
def run_chain(seed, iterations, burn_in, thin, sweeps, N0, n_min,
              A, u, du, s, sw, counts, recruiter, is_seed, exhaust, times, tstar,
              alpha, beta, eta, xi, c, gamma, n_seeds, floor, tail_w, max_tries, logtab,
              out_N, out_E, out_Du, out_ls, tally):
    """Alternate ``sweeps`` edge steps with one N step.

    ``tally`` slots: add proposed/accepted, remove proposed/accepted, no-op,
    N proposed/accepted.  Returns the number of kept draws, or -1 if the N
    proposal loop failed.
    """
    np.random.seed(seed)
    N = N0
    kept = 0
    for it in range(iterations):
        for _ in range(sweeps):
            code = edge_step(N, A, u, du, s, sw, counts, recruiter, is_seed, exhaust,
                             times, tstar, alpha, beta, eta, xi, gamma, n_seeds, logtab)
            if code == NOOP:
                tally[4] += 1
            elif code == ADD_ACCEPT or code == ADD_REJECT:
                tally[0] += 1
                if code == ADD_ACCEPT:
                    tally[1] += 1
            else:
                tally[2] += 1
                if code == REMOVE_ACCEPT:
                    tally[3] += 1
        N, acc, tries = n_step(N, du, counts[DU], alpha, beta, c, n_min, floor, tail_w,
                                max_tries)
        if tries < 0:
            return -1
        tally[5] += 1
        if acc:
            tally[6] += 1
        if it >= burn_in and (it - burn_in) % thin == 0:
            out_N[kept] = N
            out_E[kept] = counts[EDGES]
            out_Du[kept] = counts[DU]
            out_ls[kept] = log_summand(N, du, s, sw, counts, is_seed, alpha, beta, eta, xi,
                                       c, gamma, n_seeds)
            kept += 1
    return kept


@njit(cache=True)
def edge_chain_codes(seed, steps, N, A, u, du, s, sw, counts, recruiter, is_seed, exhaust,
                     times, tstar, alpha, beta, eta, xi, gamma, n_seeds, logtab, pair_i, pair_j):
    """Run edge steps at fixed N, encoding the state after each step as a
    bitmask over the listed pairs."""
    np.random.seed(seed)
    out = np.empty(steps + 1, dtype=np.int64)
    npair = pair_i.shape[0]
    code = 0
    for q in range(npair):
        if A[pair_i[q], pair_j[q]]:
            code |= 1 << q
    out[0] = code
    for t in range(steps):
        edge_step(N, A, u, du, s, sw, counts, recruiter, is_seed, exhaust, times, tstar,
                  alpha, beta, eta, xi, gamma, n_seeds, logtab)
        code = 0
        for q in range(npair):
            if A[pair_i[q], pair_j[q]]:
                code |= 1 << q
        out[t + 1] = code
    return out


@njit(cache=True)
def n_chain(seed, steps, N0, du, Du, alpha, beta, c, n_min, floor, tail_w, max_tries):
    """N-only chain at a frozen subgraph."""
    np.random.seed(seed)
    out = np.empty(steps, dtype=np.int64)
    N = N0
    for t in range(steps):
        N, _, tries = n_step(N, du, Du, alpha, beta, c, n_min, floor, tail_w, max_tries)
        out[t] = int(N)
    return out
