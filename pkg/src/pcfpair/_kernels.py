"""Per-pulse Monte Carlo kernels.

Each kernel maps a fixed-width block of uniforms to detection outcomes by
inverse-CDF sampling, so the numba and numpy implementations agree draw for
draw. Column layouts are part of the contract and must not be reordered.

Source record columns (``SRC_COLS``)::

    0 pair number   1 signal click   2 idler click

Two-source HOM columns (``HOM_COLS``)::

    0,1   pair numbers (source 1, 2)
    2,3   herald (idler) clicks
    4,5   detected signal photons (binomial thinning)
    6,7   detected Raman photons in the signal band
    8     indistinguishable-branch draw
    9,10  beamsplitter outcome for pair photons / Raman photons
    11-13 same three draws for the adjacent-pulse estimate
"""
import math

import numpy as np

from ._backend import HAVE_NUMBA, njit

SRC_COLS = 3
HOM_COLS = 14
_MAXN = 10_000


# ---------------------------------------------------------------- numba path

@njit(cache=True)
def _pairs_scalar(u, mu, thermal):
    if mu <= 0.0:
        return 0
    if thermal:
        v = 1.0 - u
        return int(math.floor(math.log(v) / math.log(mu / (1.0 + mu))))
    return _poisson_scalar(u, mu)


@njit(cache=True)
def _poisson_scalar(u, lam):
    if lam <= 0.0:
        return 0
    p = math.exp(-lam)
    cdf = p
    n = 0
    while u > cdf and n < _MAXN:
        n += 1
        p *= lam / n
        cdf += p
    return n


@njit(cache=True)
def _binom_scalar(u, n, p):
    if n <= 0 or p <= 0.0:
        return 0
    if p >= 1.0:
        return n
    q = 1.0 - p
    pk = q ** n
    cdf = pk
    k = 0
    while u > cdf and k < n:
        pk *= (n - k) / (k + 1.0) * p / q
        k += 1
        cdf += pk
    return k


@njit(cache=True)
def _all_one_port(k, l, indist):
    g = k + l
    if indist:
        c = 1.0
        for j in range(1, k + 1):
            c = c * (g - k + j) / j
        return c * 0.5 ** g
    return 0.5 ** g


@njit(cache=True)
def _coinc(k, l, r, indist, ug, ur):
    if k + l + r == 0:
        return False
    p0 = _all_one_port(k, l, indist)
    pr = 0.5 ** r
    all_c = (ug < p0) and (ur < pr)
    all_d = (ug >= 1.0 - p0) and (ur >= 1.0 - pr)
    return not (all_c or all_d)


@njit(cache=True)
def _source_nb(u, mu, raman, eta_s, eta_i, thermal):
    n_p = u.shape[0]
    npair = np.empty(n_p, np.int64)
    cs = np.empty(n_p, np.bool_)
    ci = np.empty(n_p, np.bool_)
    es = math.exp(-raman * eta_s)
    ei = math.exp(-raman * eta_i)
    for t in range(n_p):
        n = _pairs_scalar(u[t, 0], mu, thermal)
        npair[t] = n
        cs[t] = u[t, 1] >= (1.0 - eta_s) ** n * es
        ci[t] = u[t, 2] >= (1.0 - eta_i) ** n * ei
    return npair, cs, ci


@njit(cache=True)
def _hom_nb(u, n_valid, mu, raman, eta_s, eta_i, overlap, thermal):
    rows = u.shape[0]
    n1 = np.empty(rows, np.int64)
    n2 = np.empty(rows, np.int64)
    k = np.empty(rows, np.int64)
    l = np.empty(rows, np.int64)
    r1 = np.empty(rows, np.int64)
    r2 = np.empty(rows, np.int64)
    h1 = np.empty(rows, np.bool_)
    h2 = np.empty(rows, np.bool_)
    ei = math.exp(-raman * eta_i)
    for t in range(rows):
        n1[t] = _pairs_scalar(u[t, 0], mu, thermal)
        n2[t] = _pairs_scalar(u[t, 1], mu, thermal)
        h1[t] = u[t, 2] >= (1.0 - eta_i) ** n1[t] * ei
        h2[t] = u[t, 3] >= (1.0 - eta_i) ** n2[t] * ei
        k[t] = _binom_scalar(u[t, 4], n1[t], eta_s)
        l[t] = _binom_scalar(u[t, 5], n2[t], eta_s)
        r1[t] = _poisson_scalar(u[t, 6], raman * eta_s)
        r2[t] = _poisson_scalar(u[t, 7], raman * eta_s)
    four = 0
    acc = 0
    for t in range(n_valid):
        if not (h1[t] and h2[t]):
            continue
        if _coinc(k[t], l[t], r1[t] + r2[t], u[t, 8] < overlap, u[t, 9], u[t, 10]):
            four += 1
        if t + 1 < rows:
            if _coinc(k[t], l[t + 1], r1[t] + r2[t + 1], u[t, 11] < overlap,
                      u[t, 12], u[t, 13]):
                acc += 1
    return four, acc


# ---------------------------------------------------------------- numpy path

def _pairs_np(u, mu, thermal):
    if mu <= 0.0:
        return np.zeros(u.shape, np.int64)
    if thermal:
        return np.floor(np.log(1.0 - u) / math.log(mu / (1.0 + mu))).astype(np.int64)
    return _poisson_np(u, mu)


def _poisson_np(u, lam):
    n = np.zeros(u.shape, np.int64)
    if lam <= 0.0:
        return n
    p = np.full(u.shape, math.exp(-lam))
    cdf = p.copy()
    active = u > cdf
    j = 0
    while active.any() and j < _MAXN:
        j += 1
        p = np.where(active, p * (lam / j), p)
        cdf = np.where(active, cdf + p, cdf)
        n += active
        active &= u > cdf
    return n


def _binom_np(u, n, p):
    k = np.zeros(u.shape, np.int64)
    if p <= 0.0:
        return k
    if p >= 1.0:
        return n.astype(np.int64)
    q = 1.0 - p
    pk = q ** n.astype(np.float64)
    cdf = pk.copy()
    active = (u > cdf) & (k < n)
    while active.any():
        pk = np.where(active, pk * ((n - k) / (k + 1.0) * p / q), pk)
        k = k + active
        cdf = np.where(active, cdf + pk, cdf)
        active &= (u > cdf) & (k < n)
    return k


def _coinc_np(k, l, r, indist, ug, ur):
    g = k + l
    c = np.ones(g.shape)
    for j in range(1, int(k.max(initial=0)) + 1):
        c = np.where(j <= k, c * (g - k + j) / j, c)
    p0 = np.where(indist, c, 1.0) * 0.5 ** g.astype(np.float64)
    pr = 0.5 ** r.astype(np.float64)
    all_c = (ug < p0) & (ur < pr)
    all_d = (ug >= 1.0 - p0) & (ur >= 1.0 - pr)
    return (g + r > 0) & ~(all_c | all_d)


def _source_np(u, mu, raman, eta_s, eta_i, thermal):
    n = _pairs_np(u[:, 0], mu, thermal)
    nf = n.astype(np.float64)
    cs = u[:, 1] >= (1.0 - eta_s) ** nf * math.exp(-raman * eta_s)
    ci = u[:, 2] >= (1.0 - eta_i) ** nf * math.exp(-raman * eta_i)
    return n, cs, ci


def _hom_np(u, n_valid, mu, raman, eta_s, eta_i, overlap, thermal):
    rows = u.shape[0]
    n1 = _pairs_np(u[:, 0], mu, thermal)
    n2 = _pairs_np(u[:, 1], mu, thermal)
    ei = math.exp(-raman * eta_i)
    h1 = u[:, 2] >= (1.0 - eta_i) ** n1.astype(np.float64) * ei
    h2 = u[:, 3] >= (1.0 - eta_i) ** n2.astype(np.float64) * ei
    k = _binom_np(u[:, 4], n1, eta_s)
    l = _binom_np(u[:, 5], n2, eta_s)
    r1 = _poisson_np(u[:, 6], raman * eta_s)
    r2 = _poisson_np(u[:, 7], raman * eta_s)
    v = slice(0, n_valid)
    herald = h1[v] & h2[v]
    cd = _coinc_np(k[v], l[v], r1[v] + r2[v], u[v, 8] < overlap, u[v, 9], u[v, 10])
    four = int(np.count_nonzero(herald & cd))
    m = min(n_valid, rows - 1)
    a = slice(0, m)
    b = slice(1, m + 1)
    cd_adj = _coinc_np(k[a], l[b], r1[a] + r2[b], u[a, 11] < overlap, u[a, 12], u[a, 13])
    acc = int(np.count_nonzero(h1[a] & h2[a] & cd_adj))
    return four, acc


# ---------------------------------------------------------------- dispatch

def source_outcomes(u, mu, raman, eta_s, eta_i, thermal, use_numba=None):
    """Pair numbers and (signal, idler) threshold clicks for one source."""
    if use_numba is None:
        use_numba = HAVE_NUMBA
    fn = _source_nb if use_numba else _source_np
    return fn(np.ascontiguousarray(u), float(mu), float(raman), float(eta_s),
              float(eta_i), bool(thermal))


def hom_counts(u, n_valid, mu, raman, eta_s, eta_i, overlap, thermal, use_numba=None):
    """Fourfold and adjacent-pulse accidental counts over the first ``n_valid`` rows.

    ``u`` may carry one extra trailing row so the adjacent-pulse estimate can
    look one pulse ahead across chunk boundaries.
    """
    if use_numba is None:
        use_numba = HAVE_NUMBA
    fn = _hom_nb if use_numba else _hom_np
    four, acc = fn(np.ascontiguousarray(u), int(n_valid), float(mu), float(raman),
                   float(eta_s), float(eta_i), float(overlap), bool(thermal))
    return int(four), int(acc)
