"""Student t quantiles and paired-difference confidence intervals.

The t CDF is evaluated through the regularized incomplete beta function
(Lentz continued fraction) and inverted by bisection refined with Newton
steps, so no statistics package is needed at runtime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Sequence


class DegenerateInputError(ValueError):
    pass


def _betacf(a: float, b: float, x: float, max_iter: int = 300, eps: float = 1e-15) -> float:
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            break
    return h


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    lbeta = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
    front = math.exp(lbeta + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_cdf(t: float, df: float) -> float:
    t2 = t * t
    if t2 < df:
        # Near zero df / (df + t^2) rounds to 1; integrate the centre instead.
        centre = 0.5 * betainc(0.5, df / 2.0, t2 / (df + t2))
        return 0.5 + centre if t >= 0 else 0.5 - centre
    tail = 0.5 * betainc(df / 2.0, 0.5, df / (df + t2))
    return 1.0 - tail if t >= 0 else tail


def t_pdf(t: float, df: float) -> float:
    lg = math.lgamma((df + 1) / 2) - math.lgamma(df / 2)
    return math.exp(lg - 0.5 * math.log(df * math.pi) - (df + 1) / 2 * math.log1p(t * t / df))


def t_ppf(p: float, df: float) -> float:
    """Quantile of Student's t with ``df`` degrees of freedom.

    Cornish-Fisher start from the normal quantile, then Newton steps kept
    inside a bisection bracket.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability {p!r} outside (0, 1)")
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return -t_ppf(1.0 - p, df)
    z = NormalDist().inv_cdf(p)
    t = z + (z ** 3 + z) / (4 * df) + (5 * z ** 5 + 16 * z ** 3 + 3 * z) / (96 * df * df)
    lo, hi = 0.0, max(t, 1.0)
    while t_cdf(hi, df) < p:
        lo, hi = hi, hi * 2.0
    if not lo < t < hi:
        t = 0.5 * (lo + hi)
    for _ in range(100):
        err = t_cdf(t, df) - p
        if abs(err) < 1e-14:
            break
        if err > 0:
            hi = t
        else:
            lo = t
        step = t - err / t_pdf(t, df)
        t = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo < 1e-13 * max(1.0, t):
            break
    return t


@dataclass(frozen=True)
class ConfidenceInterval:
    low: float
    high: float
    mean: float
    half_width: float
    t_critical: float

    @property
    def includes_zero(self) -> bool:
        return self.low <= 0.0 <= self.high


def t_interval(mean: float, se: float, df: int, confidence: float = 0.95) -> ConfidenceInterval:
    """mean +/- t(1 - alpha/2, df) * se."""
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    if se <= 0:
        raise DegenerateInputError("standard error must be positive")
    tc = t_ppf(1.0 - (1.0 - confidence) / 2.0, df)
    half = tc * se
    return ConfidenceInterval(mean - half, mean + half, mean, half, tc)


def paired_t_ci(differences: Sequence[float], confidence: float = 0.95) -> ConfidenceInterval:
    """Confidence interval for the mean of paired differences."""
    n = len(differences)
    if n < 2:
        raise DegenerateInputError("need at least two paired differences")
    mean = math.fsum(differences) / n
    var = math.fsum((d - mean) ** 2 for d in differences) / (n - 1)
    if var == 0.0:
        raise DegenerateInputError("paired differences have zero variance")
    return t_interval(mean, math.sqrt(var / n), n - 1, confidence)
