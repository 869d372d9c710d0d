"""Compiled per-event loops for the collision sums (one pass, no temporaries)."""

import math

import numba
import numpy as np

# the TBB layer shipped here is too old and only produces a warning
numba.config.THREADING_LAYER = "workqueue"


@numba.njit(inline="always")
def _event(fr, lf, a, b, c, d, c2, d2, r):
    ff = fr[a] * fr[b]
    llo = lf[c] + lf[d]
    lhi = lf[c2] + lf[d2]
    if r == 0.0:
        lam = llo
    elif r == 1.0:
        lam = lhi
    else:
        lam = (1.0 - r) * llo + r * lhi
    x = math.exp(lam)
    if x > ff:
        x = min(x, ff + math.exp(min(llo, lhi)))
    return ff, x, lam


@numba.njit(parallel=True, cache=True)
def net_rate(f, a, b, c, d, c2, d2, r, rate):
    rows, m = f.shape
    out = np.zeros((rows, m))
    for i in numba.prange(rows):
        fr = f[i]
        lf = np.empty(m)
        for j in range(m):
            lf[j] = math.log(fr[j]) if fr[j] > 0.0 else -np.inf
        q = out[i]
        for e in range(a.size):
            ff, x, _ = _event(fr, lf, a[e], b[e], c[e], d[e], c2[e], d2[e], r[e])
            net = rate[e] * (x - ff)
            if net == 0.0:
                continue
            q[a[e]] += net
            q[b[e]] += net
            w = (1.0 - r[e]) * net
            q[c[e]] -= w
            q[d[e]] -= w
            w = r[e] * net
            q[c2[e]] -= w
            q[d2[e]] -= w
    return out


@numba.njit(parallel=True, cache=True)
def dissipation(f, a, b, c, d, c2, d2, r, rate):
    rows, m = f.shape
    out = np.zeros(rows)
    for i in numba.prange(rows):
        fr = f[i]
        lf = np.empty(m)
        for j in range(m):
            lf[j] = math.log(fr[j]) if fr[j] > 0.0 else -np.inf
        s = 0.0
        for e in range(a.size):
            ff, x, lam = _event(fr, lf, a[e], b[e], c[e], d[e], c2[e], d2[e], r[e])
            if ff > 0.0 and x > 0.0:
                s += rate[e] * (x - ff) * (lam - math.log(ff))
        out[i] = s
    return out
