"""Accuracy/AUC metrics, one-sided Welch tests and notched box statistics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

_FPMIN = 1e-300
_EPS = 1e-16
_MAXIT = 10_000


def accuracy(predictions, targets) -> float:
    p = np.asarray(predictions)
    t = np.asarray(targets)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise ValueError("accuracy of an empty vector is undefined")
    return float(np.mean(p == t))


def _average_ranks(values: np.ndarray) -> np.ndarray:
    _, inverse, counts = np.unique(values, return_inverse=True, return_counts=True)
    upper = np.cumsum(counts)
    return (upper - (counts - 1) / 2.0)[inverse]


def auc(scores, targets) -> float:
    """Probability that a random positive outranks a random negative (ties 1/2)."""
    s = np.asarray(scores, dtype=np.float64)
    t = np.asarray(targets).astype(np.int64)
    if s.shape != t.shape:
        raise ValueError(f"length mismatch: {s.shape} vs {t.shape}")
    n_pos = int(np.sum(t == 1))
    n_neg = t.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC is undefined when only one class is present")
    ranks = _average_ranks(s)
    u = ranks[t == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def mean_and_variance(sample) -> tuple[float, float]:
    """Arithmetic mean and unbiased (n - 1) variance."""
    x = np.asarray(sample, dtype=np.float64)
    if x.size < 2:
        raise ValueError("variance needs at least two values")
    mean = float(x.mean())
    return mean, float(np.sum((x - mean) ** 2) / (x.size - 1))


# -- Student t distribution via the regularized incomplete beta function ----


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _FPMIN else _FPMIN)
    h = d
    for m in range(1, _MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _FPMIN else _FPMIN)
        c = 1.0 + aa / c
        c = c if abs(c) > _FPMIN else _FPMIN
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _FPMIN else _FPMIN)
        c = 1.0 + aa / c
        c = c if abs(c) > _FPMIN else _FPMIN
        step = d * c
        h *= step
        if abs(step - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and 0 <= x <= 1."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def t_sf(t: float, df: float) -> float:
    """Upper-tail probability P(T > t) of Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    t2 = t * t
    if t2 < df:
        # near zero, form the small complementary argument directly instead of 1 - x
        tail = 0.5 - 0.5 * regularized_incomplete_beta(0.5, df / 2.0, t2 / (df + t2))
    else:
        tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t2))
    return tail if t >= 0 else 1.0 - tail


def t_cdf(t: float, df: float) -> float:
    return t_sf(-t, df)


def t_ppf(q: float, df: float) -> float:
    """Quantile of Student's t by bisection on the distribution function."""
    if not 0.0 < q < 1.0:
        raise ValueError("quantile level must lie in (0, 1)")
    if q == 0.5:
        return 0.0
    if q < 0.5:
        return -t_ppf(1.0 - q, df)
    lo, hi = 0.0, 1.0
    while t_cdf(hi, df) < q:
        lo, hi = hi, hi * 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if t_cdf(mid, df) < q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class SignificanceResult:
    p_value: float
    mean_difference: float
    ci_lower_bound: float
    test_statistic: float
    degrees_of_freedom: float
    confidence: float = 0.999
    degenerate: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def upper_tail_test(model, baseline, confidence: float = 0.999) -> SignificanceResult:
    """One-sided Welch test of H0: mean(model) <= mean(baseline).

    Also returns the one-sided lower confidence bound on the difference
    in means at level ``confidence``.
    """
    a = np.asarray(model, dtype=np.float64)
    b = np.asarray(baseline, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValueError("each sample needs at least two values")
    ma, va = mean_and_variance(a)
    mb, vb = mean_and_variance(b)
    diff = ma - mb
    sa, sb = va / a.size, vb / b.size
    se2 = sa + sb
    if se2 == 0.0:
        p = 0.5 if diff == 0 else (0.0 if diff > 0 else 1.0)
        stat = 0.0 if diff == 0 else math.copysign(math.inf, diff)
        return SignificanceResult(p, diff, diff, stat, math.nan, confidence, degenerate=True)
    se = math.sqrt(se2)
    df = se2 * se2 / (sa * sa / (a.size - 1) + sb * sb / (b.size - 1))
    stat = diff / se
    p = t_sf(stat, df)
    lower = diff - t_ppf(confidence, df) * se
    return SignificanceResult(p, diff, lower, stat, df, confidence)


# -- notched box plots -----------------------------------------------------

NOTCH_CONSTANT = 1.57


@dataclass(frozen=True)
class BoxStats:
    n: int
    median: float
    q1: float
    q3: float
    notch: float  # half-width of the median notch
    whisker_low: float
    whisker_high: float
    outliers: tuple[float, ...]

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1

    @property
    def notch_low(self) -> float:
        return self.median - self.notch

    @property
    def notch_high(self) -> float:
        return self.median + self.notch


def box_stats(sample) -> BoxStats:
    """Quartiles by linear interpolation, notch ``1.57 * IQR / sqrt(n)``,
    whiskers at the extreme points within 1.5 IQR of the box."""
    x = np.sort(np.asarray(sample, dtype=np.float64))
    if x.size == 0:
        raise ValueError("box statistics of an empty sample")
    if x.size < 2:
        raise ValueError("box statistics need at least two values")
    q1, median, q3 = (float(v) for v in np.percentile(x, [25, 50, 75], method="linear"))
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = x[(x >= lo_fence) & (x <= hi_fence)]
    outliers = tuple(float(v) for v in x[(x < lo_fence) | (x > hi_fence)])
    return BoxStats(
        n=int(x.size),
        median=median,
        q1=q1,
        q3=q3,
        notch=NOTCH_CONSTANT * iqr / math.sqrt(x.size),
        whisker_low=float(inside.min()),
        whisker_high=float(inside.max()),
        outliers=outliers,
    )


def notches_overlap(a: BoxStats, b: BoxStats) -> bool:
    return a.notch_low <= b.notch_high and b.notch_low <= a.notch_high
