"""Le Cam's two-component normal mixture with a tiny known weight.

P_theta = (1 - alpha) N(mu, 1) + alpha N(mu, sigma2), theta = (mu, sigma2).
"""
from __future__ import annotations

import math

import numpy as np
from scipy import special

from .. import gof
from ..dist import RngStream, std_normal_logpdf
from ..errors import DomainError
from .base import DataShape, Dataset, GridAxis, Model, ModelSpec, ParamPoint

DEFAULT_ALPHA = 1e-50


def _check_alpha(alpha):
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"mixture weight must lie in [0, 1], got {alpha!r}")


def _loglik_rows(x, mu, sigma2, alpha):
    # x: (B, n); mu, sigma2: (B,)
    z = x - mu[:, None]
    log_sig2 = np.log(sigma2)[:, None]
    with np.errstate(divide="ignore"):
        log_w1 = math.log1p(-alpha) if alpha < 1 else -np.inf
        log_w2 = math.log(alpha) if alpha > 0 else -np.inf
    a = log_w1 + std_normal_logpdf(z)
    b = log_w2 - 0.5 * log_sig2 - 0.5 * z * z / sigma2[:, None] - 0.5 * math.log(2 * math.pi)
    return np.logaddexp(a, b).sum(axis=1)


def lecam_loglik(x, mu: float, sigma2: float, alpha: float = DEFAULT_ALPHA) -> float:
    """Mixture log-likelihood, with the constant from the normal density kept."""
    if not sigma2 > 0:
        raise DomainError(f"sigma2 must be positive, got {sigma2!r}")
    _check_alpha(alpha)
    x = np.asarray(x.values if isinstance(x, Dataset) else x, dtype=float).ravel()
    return float(_loglik_rows(x[None, :], np.array([mu]), np.array([sigma2]), alpha)[0])


def lecam_loglik_parts(x, mu: float, sigma2: float, alpha: float = DEFAULT_ALPHA) -> tuple[float, float]:
    """Split the log-likelihood into ``(base, excess)``.

    ``base`` is the N(mu, 1) log-likelihood, which does not involve sigma2 or
    alpha; ``excess = loglik - base`` carries all of the sigma2 dependence.
    With alpha = 1e-50 the excess is far below the float spacing of the
    total, so comparisons across sigma2 must be made on the excess.
    """
    if not sigma2 > 0:
        raise DomainError(f"sigma2 must be positive, got {sigma2!r}")
    _check_alpha(alpha)
    if alpha >= 1:
        raise DomainError("the split needs alpha < 1")
    x = np.asarray(x.values if isinstance(x, Dataset) else x, dtype=float).ravel()
    z = x - mu
    base = float(std_normal_logpdf(z).sum())
    if alpha == 0:
        return base, 0.0
    # log of alpha sigma^-1 phi(z/sigma) / ((1 - alpha) phi(z))
    log_ratio = (
        math.log(alpha) - math.log1p(-alpha) - 0.5 * math.log(sigma2) - 0.5 * z * z * (1.0 / sigma2 - 1.0)
    )
    excess = x.size * math.log1p(-alpha) + float(np.logaddexp(0.0, log_ratio).sum())
    return base, excess


def lecam_cdf(t, mu: float, sigma2: float, alpha: float = DEFAULT_ALPHA):
    if not sigma2 > 0:
        raise DomainError(f"sigma2 must be positive, got {sigma2!r}")
    _check_alpha(alpha)
    z = np.asarray(t, dtype=float) - mu
    out = (1.0 - alpha) * special.ndtr(z) + alpha * special.ndtr(z / math.sqrt(sigma2))
    return float(out) if out.ndim == 0 else out


def lecam_gof_pvalue(x, mu: float, sigma2: float, alpha: float = DEFAULT_ALPHA) -> gof.PValue:
    """KS p-value of the mixture fit to ``x`` through the probability integral transform."""
    x = np.asarray(x.values if isinstance(x, Dataset) else x, dtype=float).ravel()
    u = gof.pit(x, lambda t: lecam_cdf(t, mu, sigma2, alpha))
    return gof.ks_pvalue(gof.ks_statistic(u), x.size)


class LeCam(Model):
    model_id = "lecam"
    names = ("mu", "sigma2")
    data_shape = DataShape.SCALAR_SAMPLE
    lower = (-np.inf, 0.0)
    upper = (np.inf, np.inf)
    scales = ("linear", "log")

    def __init__(self, n: int = 100, alpha: float = DEFAULT_ALPHA):
        _check_alpha(alpha)
        if not 0 < alpha < 1:
            raise DomainError("Le Cam mixture weight must satisfy 0 < alpha < 1")
        if n < 1:
            raise DomainError("sample size must be positive")
        self.n = int(n)
        self.alpha = float(alpha)

    @property
    def spec(self) -> ModelSpec:
        return ModelSpec(self.model_id, 2, {"alpha": self.alpha, "n": self.n})

    def stat(self, data: Dataset) -> np.ndarray:
        self.check_data(data)
        return np.sort(data.values)

    def loglik(self, stats, thetas):
        return _loglik_rows(stats, thetas[:, 0], thetas[:, 1], self.alpha)

    def pvalue(self, stats, thetas):
        z = stats - thetas[:, :1]
        sd = np.sqrt(thetas[:, 1:2])
        # rows of stats are sorted, so the transformed rows are too
        u = (1.0 - self.alpha) * special.ndtr(z) + self.alpha * special.ndtr(z / sd)
        return gof.ks_sf(gof.ks_statistic_sorted(u), stats.shape[1])

    def sample(self, theta: ParamPoint, stream: RngStream) -> Dataset:
        mu, sigma2 = self.as_theta(theta)
        pick = stream.uniform(self.n) < self.alpha
        z = stream.normal(self.n)
        return Dataset.scalar(mu + np.where(pick, math.sqrt(sigma2), 1.0) * z)

    def default_grid(self, data: Dataset) -> list[GridAxis]:
        xbar = float(np.mean(data.values))
        return [GridAxis(xbar - 3.0, xbar + 3.0, 101), GridAxis(math.exp(-25.0), math.exp(5.0), 61, "log")]
