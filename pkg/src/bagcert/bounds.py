"""Simultaneous Clopper-Pearson bounds on label probabilities.

The Beta quantile is computed here from scratch: the regularized incomplete
beta function is evaluated with a modified-Lentz continued fraction and
inverted by safeguarded Newton iteration inside a shrinking bracket.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

from .errors import DomainError, ValidationError

_TINY = 1e-300
_CF_EPS = 1e-16
_CF_MAX_ITER = 100_000


def _log_beta(a: float, b: float) -> float:
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def _betacf(a: float, b: float, x: float) -> float:
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def _tails(x: float, a: float, b: float) -> tuple[float, float]:
    """Return ``(I_x(a, b), 1 - I_x(a, b))``, each computed without cancellation."""
    if x <= 0.0:
        return 0.0, 1.0
    if x >= 1.0:
        return 1.0, 0.0
    log_front = a * math.log(x) + b * math.log1p(-x) - _log_beta(a, b)
    if x < (a + 1.0) / (a + b + 2.0):
        lower = math.exp(log_front) * _betacf(a, b, x) / a
        return lower, 1.0 - lower
    upper = math.exp(log_front) * _betacf(b, a, 1.0 - x) / b
    return 1.0 - upper, upper


def betainc(x: float, a: float, b: float) -> float:
    """Regularized incomplete beta function ``I_x(a, b)`` for ``a, b > 0``."""
    if a <= 0 or b <= 0:
        raise DomainError("shape parameters must be positive")
    return _tails(x, a, b)[0]


@lru_cache(maxsize=65536)
def _quantile(p: float, a: float, b: float, upper: bool) -> float:
    """Solve ``I_x(a, b) = p`` (or ``1 - I_x(a, b) = p`` when ``upper``)."""
    # Work in whichever tail is small so tiny probabilities keep full precision.
    if upper:
        y = _quantile(p, b, a, False)
        return 1.0 - y
    lo, hi = 0.0, 1.0
    log_beta = _log_beta(a, b)
    x = min(max(a / (a + b), 1e-12), 1.0 - 1e-12)
    for _ in range(2000):
        lower, _up = _tails(x, a, b)
        f = lower - p
        if f == 0.0:
            return x
        if f < 0:
            lo = x
        else:
            hi = x
        log_dens = (a - 1.0) * math.log(x) + (b - 1.0) * math.log1p(-x) - log_beta
        step = f / math.exp(log_dens) if log_dens > -700 else math.inf
        x_new = x - step
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= 1e-16 * x_new or hi - lo <= 1e-17 * hi:
            return x_new
        x = x_new
    return x


def beta_quantile(beta: float, lam: float, theta: float) -> float:
    """``beta``-th quantile of Beta(``lam``, ``theta``).

    A zero shape parameter denotes a point mass: ``lam == 0`` gives 0 and
    ``theta == 0`` gives 1.
    """
    if not 0.0 < beta < 1.0:
        raise DomainError(f"quantile level must lie in (0, 1), got {beta}")
    if lam < 0 or theta < 0:
        raise DomainError("shape parameters must be non-negative")
    if lam == 0 and theta == 0:
        raise DomainError("at least one shape parameter must be positive")
    if lam == 0:
        return 0.0
    if theta == 0:
        return 1.0
    if beta > 0.5:
        return _quantile(1.0 - beta, float(lam), float(theta), True)
    return _quantile(float(beta), float(lam), float(theta), False)


def clopper_pearson_lower(count: int, N: int, level: float) -> float:
    """One-sided lower bound: ``P(p < bound)`` is at most ``level``."""
    if count == 0:
        return 0.0
    return _quantile(level, float(count), float(N - count + 1), False)


def clopper_pearson_upper(count: int, N: int, level: float) -> float:
    """One-sided upper bound: ``P(p > bound)`` is at most ``level``."""
    if count == N:
        return 1.0
    if count == 0:
        # closed form of the Beta(1, N) upper quantile
        return -math.expm1(math.log(level) / N)
    return _quantile(level, float(count + 1), float(N - count), True)


@dataclass(frozen=True)
class ProbabilityBounds:
    l: int
    s: int
    p_lower: float
    p_upper_runner: float
    alpha_effective: float
    abstain: bool
    label_upper: Mapping[int, float]


def bonferroni_alpha(alpha: float, e: int) -> float:
    """Per-example error budget so that ``e`` bounds hold jointly w.p. ``1 - alpha``."""
    if e < 1:
        raise DomainError(f"number of test examples must be >= 1, got {e}")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha / e


def top_two(counts: Sequence[int]) -> tuple[int, int]:
    """Indices of the largest and second-largest counts, ties to the smaller index."""
    order = sorted(range(len(counts)), key=lambda j: (-counts[j], j))
    return order[0], order[1]


def simuem(counts: Sequence[int], N: int, c: int, alpha_effective: float) -> ProbabilityBounds:
    """Lower bound on the top label's probability and upper bounds on the rest.

    Each of the ``c`` one-sided bounds is taken at level ``alpha_effective / c``,
    so all of them hold simultaneously with probability ``1 - alpha_effective``.
    """
    counts = [int(v) for v in counts]
    if len(counts) != c:
        raise ValidationError(f"expected {c} counts, got {len(counts)}")
    if c < 2:
        raise ValidationError("at least two labels are required")
    if any(v < 0 for v in counts) or sum(counts) != N:
        raise ValidationError(f"counts {counts} do not sum to N={N}")
    if not 0.0 < alpha_effective < 1.0:
        raise DomainError(f"alpha_effective must lie in (0, 1), got {alpha_effective}")
    level = alpha_effective / c
    l, s = top_two(counts)
    p_lower = clopper_pearson_lower(counts[l], N, level)
    label_upper = {j: clopper_pearson_upper(counts[j], N, level) for j in range(c) if j != l}
    p_upper_runner = min(max(label_upper.values()), 1.0 - p_lower)
    return ProbabilityBounds(
        l=l,
        s=s,
        p_lower=p_lower,
        p_upper_runner=p_upper_runner,
        alpha_effective=alpha_effective,
        abstain=not p_lower > p_upper_runner,
        label_upper=label_upper,
    )
