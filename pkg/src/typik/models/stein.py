"""Length of a normal mean vector: X ~ N_n(Theta, I), interest phi = ||Theta||.

Every quantity here depends on the data only through s = ||x||^2, whose law
is non-central chi-square with n degrees of freedom and non-centrality phi^2.
"""
from __future__ import annotations

import math

import numpy as np

from .. import dist, gof
from ..dist import RngStream
from ..errors import DomainError
from .base import DataShape, Dataset, GridAxis, Model, ModelSpec, ParamPoint

LIKELIHOODS = ("profile", "marginal")


def stein_profile_loglik(r: float, phi: float) -> float:
    if r < 0 or phi < 0:
        raise DomainError("r and phi must be nonnegative")
    return -0.5 * (r - phi) ** 2


def stein_marginal_loglik(s: float, phi: float, n: int) -> float:
    """Log non-central chi-square(n, phi^2) density at ``s``."""
    if not s > 0:
        raise DomainError(f"s must be positive, got {s!r}")
    if phi < 0:
        raise DomainError("phi must be nonnegative")
    return float(dist.noncentral_chisq_logpdf(n, phi * phi, s))


def stein_mom_estimate(s: float, n: int) -> float:
    """Method-of-moments length estimate ``sqrt(max(s - n, 0))``."""
    return math.sqrt(max(s - n, 0.0))


class Stein(Model):
    """Stein's mean-vector-length model in the reduced parameter phi.

    ``direction`` is the unit vector used to place Theta when simulating;
    the reduced summaries are invariant to it.  ``likelihood`` selects the
    profile (default) or marginal log-likelihood.
    """

    model_id = "stein"
    names = ("phi",)
    data_shape = DataShape.VECTOR_OBSERVATION
    lower = (0.0,)
    upper = (np.inf,)
    scales = ("linear",)

    def __init__(self, n: int = 100, likelihood: str = "profile", direction=None):
        if n < 1:
            raise DomainError("dimension must be positive")
        if likelihood not in LIKELIHOODS:
            raise DomainError(f"unknown likelihood {likelihood!r}")
        self.n = int(n)
        self.likelihood = likelihood
        if direction is None:
            direction = np.full(self.n, 1.0 / math.sqrt(self.n))
        direction = np.asarray(direction, dtype=float).ravel()
        norm = np.linalg.norm(direction)
        if direction.size != self.n or not norm > 0:
            raise DomainError("direction must be a nonzero n-vector")
        self.direction = direction / norm

    @property
    def spec(self) -> ModelSpec:
        return ModelSpec(
            self.model_id,
            1,
            {"n": self.n, "likelihood": self.likelihood},
            has_profile_nuisance=True,
            has_marginal_loglik=True,
        )

    def stat(self, data: Dataset) -> np.ndarray:
        self.check_data(data)
        return np.array([float(np.dot(data.values, data.values))])

    def loglik(self, stats, thetas):
        s = stats[:, 0]
        phi = thetas[:, 0]
        if self.likelihood == "marginal":
            return dist.noncentral_chisq_logpdf(self.n, phi * phi, s)
        return -0.5 * (np.sqrt(s) - phi) ** 2

    def pvalue(self, stats, thetas):
        phi = thetas[:, 0]
        return gof.ncx2_min_tail(self.n, phi * phi, stats[:, 0])

    def sample(self, theta: ParamPoint, stream: RngStream) -> Dataset:
        (phi,) = self.as_theta(theta)
        return Dataset.vector(phi * self.direction + stream.normal(self.n))

    def default_grid(self, data: Dataset) -> list[GridAxis]:
        r = math.sqrt(float(self.stat(data)[0]))
        return [GridAxis(0.0, 2.0 * r, 400)]
