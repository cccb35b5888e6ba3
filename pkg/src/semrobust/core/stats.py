"""
Statistical primitives shared by attribute ranking and certification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy import stats

from ..exceptions import DomainError
from ..exceptions import InsufficientDataError
from ..exceptions import ShapeError

WILCOXON_EXACT_MAX_N = 25
WILCOXON_ALTERNATIVES = ("greater", "less")


@dataclass(frozen=True)
class TestResult:
    """Outcome of a hypothesis test."""

    __test__ = False  # not a pytest class

    statistic: float
    p_value: float
    n_effective: int
    method_note: str


def std_normal_cdf(x):
    """Phi(x)."""
    return special.ndtr(x)


def std_normal_quantile(p):
    """Phi^-1(p) for p strictly inside (0, 1)."""
    arr = np.asarray(p, dtype=np.float64)
    if np.any(~(arr > 0.0) | ~(arr < 1.0)):
        raise DomainError("Normal quantile needs 0 < p < 1", "p", float(np.min(arr)))
    return special.ndtri(p)


def clopper_pearson_lower(successes: int, trials: int, alpha: float) -> float:
    """One-sided exact lower confidence bound on a binomial proportion.

    The bound is the alpha quantile of Beta(k, n - k + 1); it is 0 when k = 0
    and alpha**(1/n) when every trial succeeds.
    """
    k, n = int(successes), int(trials)
    if n < 1:
        raise DomainError("Clopper-Pearson needs at least one trial", "trials", n)
    if not 0 <= k <= n:
        raise DomainError(f"Successes must lie in 0..{n}", "successes", k)
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)", "alpha", alpha)
    if k == 0:
        return 0.0
    if k == n:
        return float(alpha ** (1.0 / n))
    return float(stats.beta.ppf(alpha, k, n - k + 1))


def _exact_upper_tail(doubled_ranks, observed: int) -> float:
    """P(W2 >= observed) under the null, W2 being twice the positive rank sum.

    Counts the sign patterns reaching each rank sum with one pass per rank;
    this is the full 2^n enumeration folded into a convolution.
    """
    total = int(sum(doubled_ranks))
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    tail = int(counts[max(observed, 0) :].sum())
    return tail / float(2 ** len(doubled_ranks))


def wilcoxon_signed_rank(x, y, alternative: str = "greater") -> TestResult:
    """Paired signed-rank test of x - y against zero.

    Zero differences are dropped. Up to 25 remaining pairs the p-value is
    exact; beyond that a tie-corrected normal approximation with a 0.5
    continuity correction is used.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ShapeError("Wilcoxon needs two 1-D samples of equal length", "x")
    if x.size < 1:
        raise InsufficientDataError("Wilcoxon needs at least one pair", "x")
    if alternative not in WILCOXON_ALTERNATIVES:
        raise DomainError(f"alternative must be one of {WILCOXON_ALTERNATIVES}", "alternative")

    diffs = x - y
    nonzero = diffs[diffs != 0.0]
    n_eff = int(nonzero.size)
    dropped = int(diffs.size - n_eff)
    if n_eff == 0:
        return TestResult(0.0, 1.0, 0, "degenerate: all-zero differences")

    ranks = stats.rankdata(np.abs(nonzero))
    w_plus = float(ranks[nonzero > 0].sum())
    suffix = f", {dropped} zero differences dropped" if dropped else ""

    if n_eff <= WILCOXON_EXACT_MAX_N:
        doubled = [int(round(2 * r)) for r in ranks]
        if alternative == "greater":
            p_value = _exact_upper_tail(doubled, int(round(2 * w_plus)))
        else:
            w_minus = float(ranks.sum()) - w_plus
            p_value = _exact_upper_tail(doubled, int(round(2 * w_minus)))
        return TestResult(w_plus, min(1.0, p_value), n_eff, "exact" + suffix)

    note = "normal-approx, ties-corrected, continuity-corrected" + suffix
    return TestResult(w_plus, _normal_approx_p_value(nonzero, w_plus, alternative), n_eff, note)


def _normal_approx_p_value(nonzero, w_plus: float, alternative: str) -> float:
    """Tie-corrected normal tail of the positive rank sum with a 0.5 continuity correction."""
    n_eff = nonzero.size
    _, tie_counts = np.unique(np.abs(nonzero), return_counts=True)
    mean = n_eff * (n_eff + 1) / 4.0
    var = n_eff * (n_eff + 1) * (2 * n_eff + 1) / 24.0
    var -= float(np.sum(tie_counts**3 - tie_counts)) / 48.0
    sd = math.sqrt(var)
    if alternative == "greater":
        p_value = float(special.ndtr(-(w_plus - mean - 0.5) / sd))
    else:
        p_value = float(special.ndtr((w_plus - mean + 0.5) / sd))
    return min(1.0, max(0.0, p_value))


def friedman_test(data) -> TestResult:
    """Friedman rank test for k related treatments (columns) over n subjects (rows)."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ShapeError("Friedman test needs an n x k matrix", "data")
    n, k = data.shape
    if n < 2 or k < 2:
        raise InsufficientDataError(
            f"Friedman test needs at least 2 rows and 2 columns, got {n}x{k}", "data"
        )

    ranks = stats.rankdata(data, axis=1)
    rank_sums = ranks.sum(axis=0)
    chi2 = 12.0 / (n * k * (k + 1)) * float(np.sum(rank_sums**2)) - 3.0 * n * (k + 1)

    ties = 0.0
    for row in data:
        _, counts = np.unique(row, return_counts=True)
        ties += float(np.sum(counts**3 - counts))
    correction = 1.0 - ties / (n * (k**3 - k))
    if correction <= 0.0:
        return TestResult(0.0, 1.0, n, "degenerate: all rows constant")

    statistic = max(0.0, chi2 / correction)
    p_value = float(stats.chi2.sf(statistic, k - 1))
    p_value = min(1.0, max(0.0, p_value))
    return TestResult(statistic, p_value, n, "chi-square approx, ties-corrected")
