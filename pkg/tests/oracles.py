"""Independent reference implementations used to cross-check the library.

Everything here is deliberately written the slow, obvious way (explicit
loops, closed forms, exhaustive enumeration) and shares no code with the
package under test.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


# -- rolling statistics -------------------------------------------------------

def naive_rolling_mean(x, w):
    out = []
    for t in range(len(x)):
        window = x[max(0, t - w + 1) : t + 1]
        out.append(sum(window) / len(window))
    return np.array(out)


def naive_rolling_max(x, w):
    out = []
    for t in range(len(x)):
        window = x[max(0, t - w + 1) : t + 1]
        out.append(max(window))
    return np.array(out)


def naive_cv(x, w, t):
    window = np.asarray(x[max(0, t - w + 1) : t + 1], dtype=float)
    mu = window.mean()
    if mu == 0 or len(window) < 2:
        return 0.0
    sd = window.std(ddof=1)
    return float(sd / mu)


def ewma_closed_form(x, span, t):
    """Weighted sum form: alpha * sum (1-a)^i x_{t-i} + (1-a)^t x_0."""
    alpha = 2.0 / (span + 1.0)
    beta = 1.0 - alpha
    total = 0.0
    for i in range(t):
        total += alpha * beta**i * float(x[t - i])
    total += beta**t * float(x[0])
    return total


def fourier_direct(x, period, k, end_step):
    """Direct trigonometric summation over the trailing window."""
    window = x[end_step - period : end_step]
    a = b = 0.0
    for j, v in enumerate(window, start=1):
        a += float(v) * math.cos(2.0 * math.pi * j * k / period)
        b += float(v) * math.sin(2.0 * math.pi * j * k / period)
    return 2.0 / period * a, 2.0 / period * b


# -- baseline recursions ------------------------------------------------------

def ses_by_hand(x, alpha):
    level = float(x[0])
    path = [level]
    for v in x[1:]:
        level = alpha * float(v) + (1.0 - alpha) * level
        path.append(level)
    return np.array(path)


def croston_by_hand(x, alpha):
    """Forecast after each step: z/p with updates at positive demands only."""
    z = p = None
    last_event = None
    forecasts = []
    for t, v in enumerate(x):
        if v > 0:
            if z is None:
                z = float(v)
                p = float(t + 1)
            else:
                q = t - last_event
                z = alpha * float(v) + (1.0 - alpha) * z
                p = alpha * q + (1.0 - alpha) * p
            last_event = t
        forecasts.append(0.0 if z is None else z / p)
    return np.array(forecasts)


# -- statistics ---------------------------------------------------------------

def t_two_sided_p_mpmath(t, df, dps=40):
    """High-precision two-sided p from the t CDF via mpmath."""
    import mpmath

    with mpmath.workdps(dps):
        t = mpmath.mpf(abs(float(t)))
        df = mpmath.mpf(df)
        x = df / (df + t * t)
        p = mpmath.betainc(df / 2, mpmath.mpf(1) / 2, 0, x, regularized=True)
        return float(p)


def t_cdf_mpmath(t, df, dps=40):
    import mpmath

    with mpmath.workdps(dps):
        tm = mpmath.mpf(float(t))
        dfm = mpmath.mpf(df)
        x = dfm / (dfm + tm * tm)
        tail = mpmath.betainc(dfm / 2, mpmath.mpf(1) / 2, 0, x, regularized=True) / 2
        return float(1 - tail) if t > 0 else float(tail)


def _rank_abs(d):
    order = sorted(range(len(d)), key=lambda i: abs(d[i]))
    ranks = [0.0] * len(d)
    i = 0
    while i < len(d):
        j = i
        while j + 1 < len(d) and abs(d[order[j + 1]]) == abs(d[order[i]]):
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def wilcoxon_enumeration(a, b):
    """Literal enumeration of all 2^n sign assignments (drop zero diffs)."""
    d = [x - y for x, y in zip(a, b) if x != y]
    n = len(d)
    ranks = _rank_abs(d)
    w_plus = sum(r for r, v in zip(ranks, d) if v > 0)
    w_minus = sum(r for r, v in zip(ranks, d) if v < 0)
    w = min(w_plus, w_minus)
    at_most = 0
    for signs in itertools.product((0, 1), repeat=n):
        wp = sum(r for r, s in zip(ranks, signs) if s)
        if wp <= w + 1e-9:
            at_most += 1
    p = min(1.0, 2.0 * at_most / 2**n)
    return w, p


# -- geometry -----------------------------------------------------------------

def winding_number_inside(x, y, ring):
    """Nonzero winding-number test for a single ring (boundary not handled)."""
    wn = 0
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        if y1 <= y:
            if y2 > y and (x2 - x1) * (y - y1) - (x - x1) * (y2 - y1) > 0:
                wn += 1
        else:
            if y2 <= y and (x2 - x1) * (y - y1) - (x - x1) * (y2 - y1) < 0:
                wn -= 1
    return wn != 0


# -- exact greedy split -------------------------------------------------------

def exact_greedy_split(x, g, h, lam, gamma, min_child_weight):
    """Exhaustive-threshold best split: returns (feature, left_row_set, gain).

    Candidates are midpoints between consecutive distinct values per feature;
    ties resolve to the lowest (feature, threshold)."""
    n, n_feat = x.shape
    g_total, h_total = g.sum(), h.sum()
    best = None
    for f in range(n_feat):
        uniq = np.unique(x[:, f])
        for lo, hi in zip(uniq[:-1], uniq[1:]):
            thr = (lo + hi) / 2.0
            left = x[:, f] < thr
            hl, hr = h[left].sum(), h[~left].sum()
            if left.sum() < 1 or (~left).sum() < 1:
                continue
            if hl < min_child_weight or hr < min_child_weight:
                continue
            gl = g[left].sum()
            gr = g_total - gl
            gain = 0.5 * (
                gl * gl / (hl + lam) + gr * gr / (hr + lam) - g_total * g_total / (h_total + lam)
            ) - gamma
            if best is None or gain > best[2] + 1e-12:
                best = (f, frozenset(np.nonzero(left)[0].tolist()), gain)
    if best is None or best[2] <= 1e-12:
        return None
    return best
