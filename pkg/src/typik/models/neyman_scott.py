"""Neyman-Scott paired normal model, profiled over the pair means.

Pairs X_i1, X_i2 ~ N(xi_i, sigma2).  Only the interest parameter sigma2 is
exposed; the pair means enter through their maximum likelihood values.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import special

from .. import gof
from ..dist import RngStream
from ..errors import DomainError
from .base import DataShape, Dataset, GridAxis, Model, ModelSpec, ParamPoint

GOF_CHOICES = ("default", "ks-full")


def _pairs(x) -> np.ndarray:
    if isinstance(x, Dataset):
        return x.pairs
    pairs = np.asarray(x, dtype=float)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise DomainError("paired data must have shape (n, 2)")
    return pairs


def neyman_scott_profile(x) -> tuple[np.ndarray, float]:
    """Pair means and the pooled variance estimate ``(1/2n) sum of squared residuals``."""
    pairs = _pairs(x)
    if pairs.shape[0] == 0:
        raise DomainError("empty dataset")
    xi = pairs.mean(axis=1)
    ss = float(((pairs - xi[:, None]) ** 2).sum())
    return xi, ss / (2 * pairs.shape[0])


def neyman_scott_loglik(x, sigma2: float) -> float:
    """Profile log-likelihood ``-n log sigma2 - n sigma2_hat / sigma2`` (constant dropped)."""
    if not sigma2 > 0:
        raise DomainError(f"sigma2 must be positive, got {sigma2!r}")
    pairs = _pairs(x)
    n = pairs.shape[0]
    _, s2_hat = neyman_scott_profile(pairs)
    return -n * math.log(sigma2) - n * s2_hat / sigma2


def neyman_scott_gof_pvalue(x, sigma2: float) -> gof.PValue:
    """Two-tailed ChiSq(n) p-value of ``T = 2 n sigma2_hat / sigma2``."""
    if not sigma2 > 0:
        raise DomainError(f"sigma2 must be positive, got {sigma2!r}")
    pairs = _pairs(x)
    n = pairs.shape[0]
    _, s2_hat = neyman_scott_profile(pairs)
    return gof.chisq_variance_pvalue(2 * n * s2_hat / sigma2, n)


class NeymanScott(Model):
    """Profiled Neyman-Scott model.

    ``xi`` holds the pair means used when simulating; the profiled summaries
    do not depend on them, so any choice (typically the observed pair means)
    gives the same replicate distribution.  ``gof="ks-full"`` swaps the
    chi-square penalty for a KS test of the standardized residuals
    ``(x_ij - xi_hat_i) / sigma`` against N(0, 1).
    """

    model_id = "neyman_scott"
    names = ("sigma2",)
    data_shape = DataShape.PAIRED_SAMPLE
    lower = (0.0,)
    upper = (np.inf,)
    scales = ("linear",)

    def __init__(self, n: int = 100, xi=None, gof: str = "default"):
        if n < 2:
            raise DomainError("Neyman-Scott needs at least two pairs")
        if gof not in GOF_CHOICES:
            raise DomainError(f"unknown gof option {gof!r}")
        self.n = int(n)
        self.xi = np.zeros(self.n) if xi is None else np.asarray(xi, dtype=float).ravel()
        if self.xi.size != self.n:
            raise DomainError("xi must have one mean per pair")
        self.gof = gof

    @property
    def spec(self) -> ModelSpec:
        return ModelSpec(self.model_id, 1, {"n": self.n, "gof": self.gof}, has_profile_nuisance=True)

    def check_theta(self, coords):
        super().check_theta(coords)
        if coords[0] <= 0:
            raise DomainError("sigma2 must be positive")

    def stat(self, data: Dataset) -> np.ndarray:
        self.check_data(data)
        pairs = data.pairs
        resid = pairs - pairs.mean(axis=1, keepdims=True)
        ss = (resid**2).sum()
        if self.gof == "ks-full":
            return np.concatenate([[ss], np.sort(resid.ravel())])
        return np.array([ss])

    def loglik(self, stats, thetas):
        n = self.n
        s2 = thetas[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            return -n * np.log(s2) - 0.5 * stats[:, 0] / s2

    def pvalue(self, stats, thetas):
        s2 = thetas[:, 0]
        if self.gof == "ks-full":
            u = special.ndtr(stats[:, 1:] / np.sqrt(s2)[:, None])
            return gof.ks_sf(gof.ks_statistic_sorted(u), stats.shape[1] - 1)
        with np.errstate(divide="ignore"):
            return gof.chisq_two_tail(stats[:, 0] / s2, self.n)

    def sample(self, theta: ParamPoint, stream: RngStream) -> Dataset:
        (sigma2,) = self.as_theta(theta)
        z = stream.normal((self.n, 2))
        return Dataset.paired(self.xi[:, None] + math.sqrt(sigma2) * z)

    def default_grid(self, data: Dataset) -> list[GridAxis]:
        _, s2_hat = neyman_scott_profile(data)
        if not s2_hat > 0:
            raise DomainError("within-pair spread is zero; no variance grid")
        return [GridAxis(0.1 * s2_hat, 4.0 * s2_hat, 400)]
