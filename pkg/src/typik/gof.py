"""Goodness-of-fit p-values used as typicality penalties.

Three tests are provided: Kolmogorov-Smirnov uniformity of a probability
integral transform, a two-tailed chi-square test for a scaled sum of
squares, and the two-tail measure ``min{Q, 1 - Q}`` under a non-central
chi-square law.  p-values are floored at ``PVALUE_FLOOR`` and never
returned as an exact zero.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from . import dist
from .errors import DomainError

__all__ = [
    "PVALUE_FLOOR",
    "KS_EXACT_MAX_N",
    "PValueMethod",
    "PValue",
    "pit",
    "ks_statistic",
    "ks_statistic_sorted",
    "ks_pvalue",
    "ks_sf",
    "chisq_variance_pvalue",
    "chisq_two_tail",
    "ncx2_two_tail",
    "ncx2_min_tail",
]

PVALUE_FLOOR = 1e-300
KS_EXACT_MAX_N = 140
# below this two-sided level the doubled one-sided tail is used in place of 1 - P(D < d)
_TAIL_SWITCH = 1e-6


class PValueMethod(str, enum.Enum):
    KS_EXACT = "ks_exact"
    KS_ASYMPTOTIC = "ks_asymptotic"
    CHISQ_TWO_TAIL = "chisq_two_tail"
    NCX2_TWO_TAIL = "ncx2_two_tail"


@dataclass(frozen=True)
class PValue:
    value: float
    method: PValueMethod

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise DomainError(f"p-value outside [0, 1]: {self.value!r}")

    def __float__(self):
        return float(self.value)


def _floor(p):
    return np.maximum(np.minimum(p, 1.0), PVALUE_FLOOR)


def pit(x, cdf: Callable) -> np.ndarray:
    """Probability integral transform ``cdf(x_i)`` componentwise."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("pit requires finite data")
    return np.asarray(cdf(x), dtype=float)


def ks_statistic_sorted(u_sorted: np.ndarray) -> np.ndarray:
    """KS distance from uniformity for rows already sorted along the last axis."""
    n = u_sorted.shape[-1]
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - u_sorted, axis=-1)
    d_minus = np.max(u_sorted - (i - 1) / n, axis=-1)
    return np.maximum(d_plus, d_minus)


def ks_statistic(u) -> float:
    """Kolmogorov-Smirnov statistic of ``u`` against Unif(0, 1).

    >>> ks_statistic([0.25, 0.75])
    0.25
    """
    u = np.asarray(u, dtype=float).ravel()
    if u.size == 0:
        raise DomainError("ks_statistic requires a nonempty sample")
    if np.any(~np.isfinite(u)) or np.any(u < 0) or np.any(u > 1):
        raise DomainError("ks_statistic requires values in [0, 1]")
    return float(ks_statistic_sorted(np.sort(u)))


def _smirnov_upper(n: int, d: float) -> float:
    """Exact one-sided tail P(D_n^+ >= d) (Birnbaum-Tingey sum)."""
    if d <= 0:
        return 1.0
    if d >= 1:
        return 0.0
    jmax = int(math.floor(n * (1.0 - d) + 1e-12))
    j = np.arange(jmax + 1, dtype=float)
    a = 1.0 - d - j / n
    keep = a > 0
    j, a = j[keep], a[keep]
    if j.size == 0:
        return 0.0
    logc = special.gammaln(n + 1) - special.gammaln(j + 1) - special.gammaln(n - j + 1)
    logt = logc + (n - j) * np.log(a) + (j - 1) * np.log(d + j / n)
    m = logt.max()
    return float(d * math.exp(m) * np.exp(logt - m).sum())


def _mtw_cdf(n: int, d: float) -> float:
    """P(D_n < d) by the Marsaglia-Tsang-Wang matrix power."""
    k = int(n * d) + 1
    m = 2 * k - 1
    h = k - n * d
    idx = np.arange(m)[:, None] - np.arange(m)[None, :] + 1
    with np.errstate(over="ignore"):
        H = np.where(idx >= 0, 1.0 / special.gamma(np.maximum(idx, 0) + 1.0), 0.0)
    powers = h ** np.arange(1, m + 1)
    fact = special.gamma(np.arange(1, m + 1) + 1.0)
    H[:, 0] -= powers / fact
    H[m - 1, :] -= (powers / fact)[::-1]
    if 2 * h - 1 > 0:
        H[m - 1, 0] += (2 * h - 1) ** m / fact[-1]
    # entries of H**n stay below e**n, no rescaling needed for n <= 140
    Hn = np.linalg.matrix_power(H, n)
    val = Hn[k - 1, k - 1]
    if val <= 0:
        return 0.0
    return math.exp(special.gammaln(n + 1) - n * math.log(n) + math.log(val))


def _kolmogorov_sf(t: float) -> float:
    if t <= 0:
        return 1.0
    if t < 1.0:
        # theta-function form of the limiting CDF converges fast for small t
        k = np.arange(1, 30)
        cdf = math.sqrt(2 * math.pi) / t * np.exp(-((2 * k - 1) ** 2) * math.pi**2 / (8 * t * t)).sum()
        return 1.0 - cdf
    k = np.arange(1, 101)
    return float(2.0 * np.sum((-1.0) ** (k - 1) * np.exp(-2.0 * k * k * t * t)))


@functools.lru_cache(maxsize=65536)
def _ks_sf_cached(d: float, n: int) -> tuple[float, str]:
    if d <= 0.5 / n:
        return 1.0, PValueMethod.KS_EXACT.value
    if d >= 1.0:
        return 0.0, PValueMethod.KS_EXACT.value
    if n > KS_EXACT_MAX_N:
        return _kolmogorov_sf(math.sqrt(n) * d), PValueMethod.KS_ASYMPTOTIC.value
    two_sided_tail = 2.0 * _smirnov_upper(n, d)
    # for d >= 1/2 the events D+ >= d and D- >= d are disjoint: exact
    if d >= 0.5 or two_sided_tail < _TAIL_SWITCH:
        return two_sided_tail, PValueMethod.KS_EXACT.value
    return 1.0 - _mtw_cdf(n, d), PValueMethod.KS_EXACT.value


def ks_sf(d, n: int) -> np.ndarray:
    """Vectorized P(D_n >= d), floored; identical statistics are computed once."""
    d = np.asarray(d, dtype=float)
    flat = d.ravel()
    uniq, inv = np.unique(flat, return_inverse=True)
    vals = np.array([_ks_sf_cached(float(v), int(n))[0] for v in uniq])
    return _floor(np.clip(vals, 0.0, 1.0))[inv].reshape(d.shape)


def ks_pvalue(D: float, n: int) -> PValue:
    """Null probability that the KS statistic of ``n`` uniforms is at least ``D``.

    Exact for ``n <= 140``; the Kolmogorov limiting series beyond.
    """
    if not 0.0 <= D <= 1.0:
        raise DomainError(f"KS statistic must lie in [0, 1], got {D!r}")
    if int(n) != n or n < 1:
        raise DomainError(f"sample size must be a positive integer, got {n!r}")
    value, method = _ks_sf_cached(float(D), int(n))
    return PValue(float(_floor(min(max(value, 0.0), 1.0))), PValueMethod(method))


def chisq_two_tail(T, df: int) -> np.ndarray:
    """Vectorized ``min{1, 2 min(F(T), 1 - F(T))}`` for the central chi-square."""
    T = np.asarray(T, dtype=float)
    lower = dist.chisq_cdf(df, T)
    upper = dist.chisq_sf(df, T)
    return _floor(np.minimum(1.0, 2.0 * np.minimum(lower, upper)))


def chisq_variance_pvalue(T: float, df: int) -> PValue:
    """Two-tailed chi-square p-value of a scaled sum of squares ``T``."""
    if not T >= 0:
        raise DomainError(f"chi-square statistic must be nonnegative, got {T!r}")
    return PValue(float(chisq_two_tail(T, df)), PValueMethod.CHISQ_TWO_TAIL)


def ncx2_min_tail(df: int, nc, s) -> np.ndarray:
    """Vectorized ``min{Q(s), 1 - Q(s)}`` under the non-central chi-square."""
    lower, upper = dist.noncentral_chisq_tails(df, nc, s)
    return _floor(np.minimum(lower, upper))


def ncx2_two_tail(df: int, nc: float, s: float) -> PValue:
    """Smaller tail of the non-central chi-square at ``s``; at most 1/2."""
    if not s > 0:
        raise DomainError(f"statistic must be positive, got {s!r}")
    return PValue(float(ncx2_min_tail(df, nc, s)), PValueMethod.NCX2_TWO_TAIL)
