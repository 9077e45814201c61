"""Numba kernels shared by the index policies and the fused cascading loop.

Both the generic (numpy) round loop and the fused loop call these same
functions, so index values are bit-identical across the two execution paths.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def klucb_threshold(t):
    # ln t + 3 ln ln t, with ln ln t clamped to 0 where it would be negative
    ln_t = np.log(float(t))
    if ln_t > 1.0:
        return ln_t + 3.0 * np.log(ln_t)
    return ln_t


@njit(cache=True)
def klucb_scalar(mu, count, thr):
    # sup{q in [mu, 1] : count * kl(mu, q) <= thr}, bisection to 1e-9
    if count <= 0.0 or mu >= 1.0:
        return 1.0
    budget = thr / count
    if budget <= 0.0:
        return mu
    if mu <= 0.0:
        return 1.0 - np.exp(-budget)
    c0 = mu * np.log(mu) + (1.0 - mu) * np.log(1.0 - mu)
    lo = mu
    hi = 1.0
    while hi - lo > 1e-9:
        mid = 0.5 * (lo + hi)
        kl = c0 - mu * np.log(mid) - (1.0 - mu) * np.log(1.0 - mid)
        if kl <= budget:
            lo = mid
        else:
            hi = mid
    return lo


@njit(cache=True)
def klucb_block(totals, counts, thr, out):
    for i in range(out.shape[0]):
        c = counts[i]
        if c <= 0.0:
            out[i] = 1.0
        else:
            out[i] = klucb_scalar(totals[i] / c, c, thr)


@njit(cache=True)
def cucb_block(totals, counts, log_t, coef, out):
    # min(1, empirical mean + sqrt(coef * ln t / count)); unobserved arms get 1
    for i in range(out.shape[0]):
        c = counts[i]
        if c <= 0.0:
            out[i] = 1.0
        else:
            v = totals[i] / c + np.sqrt(coef * log_t / c)
            out[i] = 1.0 if v > 1.0 else v


@njit(cache=True)
def ts_cascade_block(totals, counts, t, z, empirical_variance, out):
    # one shared standard normal z perturbs every arm around its mean
    log_t1 = np.log(float(t) + 1.0)
    for i in range(out.shape[0]):
        c = counts[i]
        mu = totals[i] / c if c > 0.0 else 0.0
        base = log_t1 / (c + 1.0)
        if empirical_variance:
            w = np.sqrt(mu * (1.0 - mu) * base)
            if base > w:
                w = base
        else:
            w = np.sqrt(base)
        v = mu + z * w
        if v < 0.0:
            v = 0.0
        elif v > 1.0:
            v = 1.0
        out[i] = v
