"""Paired statistical comparison of runs over per-query scores.

Paired t-test and Wilcoxon signed-rank (exact for small tie-free samples,
normal approximation otherwise), Holm / Bonferroni family-wise correction,
Cohen's d for paired data, and a seeded percentile bootstrap for the mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import fsum

import numpy as np
from scipy import stats as _scipy_stats

from .errors import WorkbenchError

INSUFFICIENT_DATA = "INSUFFICIENT_DATA"
ZERO_VARIANCE = "ZERO_VARIANCE"
INVALID_PVALUE = "INVALID_PVALUE"
INVALID_ALPHA = "INVALID_ALPHA"
INVALID_PARAMETER = "INVALID_PARAMETER"
NON_FINITE_SCORE = "NON_FINITE_SCORE"

METHOD_T_TEST = "t_test"
METHOD_WILCOXON_EXACT = "wilcoxon_exact"
METHOD_WILCOXON_NORMAL = "wilcoxon_normal"

# Largest tie-free sample evaluated by exact signed-rank enumeration.
EXACT_WILCOXON_LIMIT = 25


@dataclass(frozen=True)
class PairedSample:
    """Per-query scores of two systems aligned on the same qids."""

    qids: tuple[str, ...]
    a: tuple[float, ...]
    b: tuple[float, ...]

    def __post_init__(self):
        n = len(self.qids)
        if len(self.a) != n or len(self.b) != n:
            raise WorkbenchError(INVALID_PARAMETER, "qids, a, and b must have equal length")
        if n < 2:
            raise WorkbenchError(INSUFFICIENT_DATA, f"need at least 2 paired scores, got {n}")
        if not all(math.isfinite(x) for x in self.a + self.b):
            raise WorkbenchError(NON_FINITE_SCORE, "paired scores must be finite")

    def differences(self) -> list[float]:
        return [x - y for x, y in zip(self.a, self.b)]


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    n_effective: int
    method: str

    def to_json(self) -> dict:
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "n_effective": self.n_effective,
            "method": self.method,
        }


@dataclass(frozen=True)
class CorrectionResult:
    raw_p: tuple[float, ...]
    adjusted_p: tuple[float, ...]
    reject: tuple[bool, ...]
    alpha: float
    method: str

    def to_json(self) -> dict:
        return {
            "raw_p": list(self.raw_p),
            "adjusted_p": list(self.adjusted_p),
            "reject": list(self.reject),
            "alpha": self.alpha,
            "method": self.method,
        }


def paired_t_test(sample: PairedSample) -> TestResult:
    """Two-sided paired t-test on per-query score differences."""
    d = sample.differences()
    n = len(d)
    if all(x == 0.0 for x in d):
        return TestResult(statistic=0.0, p_value=1.0, n_effective=n, method=METHOD_T_TEST)
    if all(x == d[0] for x in d):
        raise WorkbenchError(ZERO_VARIANCE, "score differences are constant; t statistic undefined")
    mean = fsum(d) / n
    var = fsum((x - mean) ** 2 for x in d) / (n - 1)
    if var == 0.0:
        raise WorkbenchError(ZERO_VARIANCE, "score differences are constant; t statistic undefined")
    t = mean / math.sqrt(var / n)
    p = 2.0 * float(_scipy_stats.t.sf(abs(t), n - 1))
    return TestResult(statistic=t, p_value=min(p, 1.0), n_effective=n, method=METHOD_T_TEST)


def _average_ranks(values: list[float]) -> list[float]:
    """Ranks 1..n with ties assigned the average of their positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j + 2) / 2  # positions are 1-based
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def signed_rank_counts(n: int) -> list[int]:
    """Distribution of W+ over all 2^n sign assignments of ranks 1..n.

    counts[w] = number of assignments whose positive-rank sum equals w.
    """
    total = n * (n + 1) // 2
    counts = [0] * (total + 1)
    counts[0] = 1
    for r in range(1, n + 1):
        for w in range(total, r - 1, -1):
            counts[w] += counts[w - r]
    return counts


def wilcoxon_signed_rank(sample: PairedSample) -> TestResult:
    """Two-sided Wilcoxon signed-rank test; zero differences are dropped."""
    d = [x for x in sample.differences() if x != 0.0]
    n = len(d)
    if n == 0:
        return TestResult(statistic=0.0, p_value=1.0, n_effective=0, method=METHOD_WILCOXON_EXACT)
    abs_d = [abs(x) for x in d]
    ranks = _average_ranks(abs_d)
    w_plus = fsum(r for r, x in zip(ranks, d) if x > 0)
    total = n * (n + 1) / 2
    w_minus = total - w_plus
    w = min(w_plus, w_minus)
    has_ties = len(set(abs_d)) < n

    if n <= EXACT_WILCOXON_LIMIT and not has_ties:
        counts = signed_rank_counts(n)
        below = sum(counts[: int(w) + 1])
        p = min(1.0, 2.0 * below / 2**n)
        return TestResult(statistic=w, p_value=p, n_effective=n, method=METHOD_WILCOXON_EXACT)

    mu = n * (n + 1) / 4
    tie_term = 0.0
    seen: dict[float, int] = {}
    for x in abs_d:
        seen[x] = seen.get(x, 0) + 1
    for t in seen.values():
        tie_term += t**3 - t
    sigma2 = n * (n + 1) * (2 * n + 1) / 24 - tie_term / 48
    diff = w - mu
    if diff != 0:
        diff -= 0.5 * math.copysign(1.0, diff)  # continuity correction toward the mean
    z = diff / math.sqrt(sigma2)
    p = min(1.0, math.erfc(-z / math.sqrt(2)))  # 2 * Phi(z)
    return TestResult(statistic=w, p_value=p, n_effective=n, method=METHOD_WILCOXON_NORMAL)


def _validate_pvalues(raw_p: list[float]) -> None:
    for p in raw_p:
        if not (0.0 <= p <= 1.0) or not math.isfinite(p):
            raise WorkbenchError(INVALID_PVALUE, f"p-value out of [0, 1]: {p!r}")


def _validate_alpha(alpha: float) -> None:
    if not (0.0 < alpha < 1.0):
        raise WorkbenchError(INVALID_ALPHA, f"alpha must lie in (0, 1), got {alpha!r}")


def holm_correction(raw_p: list[float], alpha: float = 0.05) -> CorrectionResult:
    """Holm's step-down adjustment; uniformly at least as powerful as Bonferroni."""
    _validate_pvalues(raw_p)
    _validate_alpha(alpha)
    m = len(raw_p)
    order = sorted(range(m), key=lambda i: raw_p[i])
    adjusted = [0.0] * m
    running = 0.0
    for pos, idx in enumerate(order):
        running = max(running, min(1.0, (m - pos) * raw_p[idx]))
        adjusted[idx] = running
    reject = [p_adj <= alpha for p_adj in adjusted]
    return CorrectionResult(
        raw_p=tuple(raw_p), adjusted_p=tuple(adjusted), reject=tuple(reject), alpha=alpha, method="holm"
    )


def bonferroni_correction(raw_p: list[float], alpha: float = 0.05) -> CorrectionResult:
    _validate_pvalues(raw_p)
    _validate_alpha(alpha)
    m = len(raw_p)
    adjusted = [min(1.0, m * p) for p in raw_p]
    reject = [p_adj <= alpha for p_adj in adjusted]
    return CorrectionResult(
        raw_p=tuple(raw_p), adjusted_p=tuple(adjusted), reject=tuple(reject), alpha=alpha, method="bonferroni"
    )


def apply_correction(method: str, raw_p: list[float], alpha: float = 0.05) -> CorrectionResult:
    if method == "holm":
        return holm_correction(raw_p, alpha)
    if method == "bonferroni":
        return bonferroni_correction(raw_p, alpha)
    raise WorkbenchError(INVALID_PARAMETER, f"unknown correction method {method!r}")


def bootstrap_ci(
    scores: list[float], confidence: float = 0.95, iterations: int = 2000, seed: int = 42
) -> tuple[float, float]:
    """Seeded percentile bootstrap interval for the mean.

    Identical (seed, inputs) give identical intervals; the interval is
    widened if needed so the sample mean always lies inside it.
    """
    if len(scores) < 2:
        raise WorkbenchError(INSUFFICIENT_DATA, f"need at least 2 scores, got {len(scores)}")
    if not (0.0 < confidence < 1.0):
        raise WorkbenchError(INVALID_PARAMETER, f"confidence must lie in (0, 1), got {confidence!r}")
    if iterations < 100:
        raise WorkbenchError(INVALID_PARAMETER, f"need at least 100 iterations, got {iterations}")
    arr = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise WorkbenchError(NON_FINITE_SCORE, "scores must be finite")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, arr.size, size=(iterations, arr.size))
    means = arr[idx].mean(axis=1)
    tail = (1.0 - confidence) / 2.0
    lower = float(np.quantile(means, tail))
    upper = float(np.quantile(means, 1.0 - tail))
    sample_mean = float(arr.mean())
    return min(lower, sample_mean), max(upper, sample_mean)


def paired_effect_size(sample: PairedSample) -> float:
    """Cohen's d for paired data: mean(d) / sd(d)."""
    d = sample.differences()
    n = len(d)
    if all(x == d[0] for x in d):
        raise WorkbenchError(ZERO_VARIANCE, "score differences have zero variance")
    mean = fsum(d) / n
    var = fsum((x - mean) ** 2 for x in d) / (n - 1)
    if var == 0.0:
        raise WorkbenchError(ZERO_VARIANCE, "score differences have zero variance")
    return mean / math.sqrt(var)
