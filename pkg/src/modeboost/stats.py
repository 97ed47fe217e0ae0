"""Paired significance tests and the Student t distribution they rest on.

Self-contained implementations: the t CDF goes through the regularized
incomplete beta function (Lentz's continued fraction), and the Wilcoxon
signed-rank null distribution is computed exactly for small samples via the
rank-sum counting recurrence (equivalent to enumerating all sign
assignments), switching to the continuity-corrected normal approximation for
larger ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AllZeroDifferences,
    LengthMismatch,
    TooFewSamples,
)

WILCOXON_EXACT_LIMIT = 25


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    n: int
    method: str


# ---------------------------------------------------------------------------
# Student t distribution
# ---------------------------------------------------------------------------

def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (Lentz's method)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_cdf(t: float, df: float) -> float:
    """P(T <= t) for Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if t == 0.0:
        return 0.5
    x = df / (df + t * t)
    tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x)
    return 1.0 - tail if t > 0 else tail


def student_t_two_sided_p(t: float, df: float) -> float:
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


# ---------------------------------------------------------------------------
# paired tests
# ---------------------------------------------------------------------------

def _paired_diffs(errors_a, errors_b) -> np.ndarray:
    a = np.asarray(errors_a, dtype=np.float64)
    b = np.asarray(errors_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatch(f"paired samples differ in shape: {a.shape} vs {b.shape}")
    return a - b


def paired_t_test(errors_a, errors_b) -> TestResult:
    """Two-sided paired Student t-test on the differences a - b.

    All-zero differences give p = 1 by convention; zero spread with a
    nonzero mean gives p = 0 (the statistic diverges).
    """
    d = _paired_diffs(errors_a, errors_b)
    n = len(d)
    if n < 2:
        raise TooFewSamples(f"paired t-test needs n >= 2, got {n}")
    mean = d.mean()
    sd = d.std(ddof=1)
    if sd == 0.0:
        if mean == 0.0:
            return TestResult(0.0, 1.0, n, "paired_t")
        return TestResult(math.copysign(math.inf, mean), 0.0, n, "paired_t")
    t = mean / (sd / math.sqrt(n))
    p = student_t_two_sided_p(t, n - 1)
    return TestResult(float(t), float(min(1.0, p)), n, "paired_t")


def _signed_ranks(d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Average ranks of |d| (ties share the mean rank) and the sign of d."""
    abs_d = np.abs(d)
    order = np.argsort(abs_d, kind="stable")
    ranks = np.empty(len(d))
    sorted_abs = abs_d[order]
    i = 0
    while i < len(d):
        j = i
        while j + 1 < len(d) and sorted_abs[j + 1] == sorted_abs[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks, np.sign(d)


def _exact_wplus_counts(scaled_ranks: np.ndarray) -> np.ndarray:
    """counts[s] = number of sign assignments with doubled rank sum s.

    Equivalent to enumerating all 2^n assignments, computed as the
    coefficient table of prod_i (1 + x^{2 r_i}).
    """
    total = int(scaled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in scaled_ranks:
        r = int(r)
        counts[r:] += counts[: counts.size - r].copy()
    return counts


def wilcoxon_signed_rank(errors_a, errors_b) -> TestResult:
    """Two-sided Wilcoxon signed-rank test on the paired differences.

    Zero differences are dropped first.  W = min(W+, W-).  For n <= 25 the
    p-value is exact (two-sided mass doubled from one tail, capped at 1);
    beyond that, normal approximation with continuity and tie corrections.
    """
    d = _paired_diffs(errors_a, errors_b)
    d = d[d != 0.0]
    n = len(d)
    if n == 0:
        raise AllZeroDifferences("all paired differences are zero")
    ranks, signs = _signed_ranks(d)
    w_plus = ranks[signs > 0].sum()
    w_minus = ranks[signs < 0].sum()
    w = min(w_plus, w_minus)

    if n <= WILCOXON_EXACT_LIMIT:
        p = _wilcoxon_exact_p(ranks, w)
    else:
        p = _wilcoxon_approx_p(ranks, w, n)
    return TestResult(float(w), float(min(1.0, p)), n, "wilcoxon")


def _wilcoxon_exact_p(ranks: np.ndarray, w: float) -> float:
    scaled = np.rint(2.0 * ranks).astype(np.int64)
    counts = _exact_wplus_counts(scaled)
    cutoff = int(round(2.0 * w))
    lower_tail = counts[: cutoff + 1].sum() / counts.sum()
    return min(1.0, 2.0 * lower_tail)


def _wilcoxon_approx_p(ranks: np.ndarray, w: float, n: int) -> float:
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    # Tie correction: each group of t tied ranks removes (t^3 - t)/48.
    _, tie_counts = np.unique(ranks, return_counts=True)
    var -= ((tie_counts**3 - tie_counts) / 48.0).sum()
    if var <= 0:
        return 1.0
    z = (w - mean + 0.5) / math.sqrt(var)
    return min(1.0, 2.0 * normal_cdf(z))
