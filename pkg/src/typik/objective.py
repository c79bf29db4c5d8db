"""Typicality-penalized log-likelihood and its maximization.

The objective is ``loglik(theta) - lam * penalty(theta)`` where the penalty
is ``-log`` of the model's goodness-of-fit p-value, floored so it stays
finite.  Its maximizer is the maximum typicality estimator; the deviance
``rho(theta_check) - rho(theta)`` is the nonnegative drop from the peak.

Maximization is derivative-free: a grid scan picks the best cell, and an
optional Nelder-Mead pass refines from there inside the grid box.  Axes
declared log-scaled are searched in log coordinates.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import simplex
from .errors import DomainError, OptimizationError
from .gof import PVALUE_FLOOR
from .models.base import Dataset, GridAxis, Model, ParamPoint

__all__ = [
    "ObjectiveConfig",
    "FitResult",
    "BatchFit",
    "penalty",
    "objective",
    "objective_values",
    "maximize",
    "maximize_batch",
    "deviance",
]

OPTIMIZERS = ("grid", "grid_then_simplex")
# upper bound on stats elements touched per grid-evaluation chunk
_CHUNK = 1 << 22


@dataclass(frozen=True)
class ObjectiveConfig:
    """Settings for the penalized objective.

    ``grid`` of ``None`` means the model's data-dependent default; use
    :meth:`resolved` to pin it to a dataset before reusing it on replicates.
    """

    lam: float = 0.0
    pvalue_floor: float = PVALUE_FLOOR
    optimizer: str = "grid_then_simplex"
    grid: Optional[tuple] = None
    max_iter: int = 400
    tol: float = 1e-8

    def __post_init__(self):
        if not self.lam >= 0:
            raise DomainError(f"lambda must be nonnegative, got {self.lam!r}")
        if not 0 < self.pvalue_floor < 1:
            raise DomainError("pvalue_floor must lie in (0, 1)")
        if self.optimizer not in OPTIMIZERS:
            raise DomainError(f"unknown optimizer {self.optimizer!r}")
        if self.grid is not None:
            object.__setattr__(self, "grid", tuple(self.grid))

    def resolved(self, model: Model, data: Dataset) -> "ObjectiveConfig":
        if self.grid is not None:
            if len(self.grid) != model.dim:
                raise DomainError(f"{model.model_id} needs {model.dim} grid axes, got {len(self.grid)}")
            return self
        return replace(self, grid=tuple(model.default_grid(data)))


@dataclass
class FitResult:
    theta_check: ParamPoint
    objective_value: float
    evaluations: int
    trace: Optional[list] = field(default=None, repr=False)


@dataclass
class BatchFit:
    theta: np.ndarray  # (B, d), natural coordinates
    value: np.ndarray  # (B,)
    failed: np.ndarray  # (B,) bool
    evaluations: np.ndarray  # (B,)


def _is_log(model: Model, axes: Sequence[GridAxis]):
    return np.array([ax.scale == "log" for ax in axes])


def _to_work(theta, logmask):
    return np.where(logmask, np.log(np.where(logmask, theta, 1.0)), theta)


def _from_work(w, logmask):
    return np.where(logmask, np.exp(w), w)


def _work_box(model: Model, axes, logmask):
    """Grid box intersected with the model box, in working coordinates."""
    glo = _to_work(np.array([ax.lo for ax in axes]), logmask)
    ghi = _to_work(np.array([ax.hi for ax in axes]), logmask)
    with np.errstate(divide="ignore"):
        mlo = np.where(logmask, np.log(np.maximum(model.lower, 0.0)), model.lower)
        mhi = np.where(logmask, np.log(model.upper), model.upper)
    return np.maximum(glo, mlo), np.minimum(ghi, mhi)


def objective_values(model: Model, stats: np.ndarray, thetas: np.ndarray, cfg: ObjectiveConfig) -> np.ndarray:
    """Batched objective; NaN from degenerate arithmetic is mapped to -inf."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        val = model.loglik(stats, thetas)
        if cfg.lam != 0:
            p = model.pvalue(stats, thetas)
            val = val - cfg.lam * -np.log(np.maximum(p, cfg.pvalue_floor))
    return np.where(np.isnan(val), -np.inf, val)


def _single(model: Model, x: Dataset, theta):
    coords = model.as_theta(theta)
    return model.stat(x)[None, :], coords[None, :]


def penalty(model: Model, x: Dataset, theta, cfg: ObjectiveConfig) -> float:
    """``-log max(pval, floor)``; zero exactly when the p-value is one."""
    stats, th = _single(model, x, theta)
    p = float(model.pvalue(stats, th)[0])
    return float(-np.log(max(p, cfg.pvalue_floor)))


def objective(model: Model, x: Dataset, theta, cfg: ObjectiveConfig) -> float:
    stats, th = _single(model, x, theta)
    return float(objective_values(model, stats, th, cfg)[0])


def _grid_points(axes: Sequence[GridAxis]) -> np.ndarray:
    # lexicographic order: first axis slowest, every axis ascending
    return np.array(list(itertools.product(*(ax.values() for ax in axes))), dtype=float)


def maximize_batch(model: Model, stats: np.ndarray, cfg: ObjectiveConfig, keep_grid: bool = False):
    """Maximize the objective for each row of ``stats`` over a shared grid spec.

    Returns a :class:`BatchFit` (and the grid values if ``keep_grid``).  Rows
    whose grid values are all non-finite are flagged ``failed``.
    """
    if cfg.grid is None:
        raise DomainError("maximize_batch needs a resolved grid")
    stats = np.atleast_2d(stats)
    B, k = stats.shape
    axes = cfg.grid
    pts = _grid_points(axes)
    G = pts.shape[0]
    gvals = np.empty((B, G))
    rows_per = max(1, _CHUNK // max(G * k, 1))
    for s in range(0, B, rows_per):
        sl = slice(s, min(s + rows_per, B))
        nb = sl.stop - sl.start
        st = np.repeat(stats[sl], G, axis=0)
        th = np.tile(pts, (nb, 1))
        gvals[sl] = objective_values(model, st, th, cfg).reshape(nb, G)
    finite = np.isfinite(gvals)
    failed = ~finite.any(axis=1)
    # argmax returns the first maximum, i.e. the lexicographically lowest point
    best = np.argmax(np.where(finite, gvals, -np.inf), axis=1)
    theta = pts[best]
    value = gvals[np.arange(B), best]
    evaluations = np.full(B, G)

    if cfg.optimizer == "grid_then_simplex":
        logmask = _is_log(model, axes)
        lo, hi = _work_box(model, axes, logmask)
        step = (hi - lo) / np.array([ax.points - 1 for ax in axes])
        ok = np.flatnonzero(~failed)
        if ok.size:
            sub_stats = stats[ok]

            def neg(rows, w):
                return -objective_values(model, sub_stats[rows], _from_work(w, logmask), cfg)

            res = simplex.minimize_batch(
                neg, _to_work(theta[ok], logmask), step, lo, hi, max_iter=cfg.max_iter * model.dim,
                xtol=cfg.tol, ftol=cfg.tol,
            )
            refined = -res.fun
            better = refined > value[ok]
            theta[ok[better]] = _from_work(res.x[better], logmask)
            value[ok[better]] = refined[better]
            evaluations[ok] += res.nfev
    fit = BatchFit(theta, value, failed, evaluations)
    if keep_grid:
        return fit, pts, gvals
    return fit


def maximize(model: Model, x: Dataset, cfg: ObjectiveConfig, trace: bool = False) -> FitResult:
    """Maximum typicality estimate for one dataset."""
    cfg = cfg.resolved(model, x)
    stats = model.stat(x)[None, :]
    fit, pts, gvals = maximize_batch(model, stats, cfg, keep_grid=True)
    if fit.failed[0]:
        raise OptimizationError(f"{model.model_id}: objective is non-finite over the whole grid")
    point = ParamPoint(model.model_id, tuple(fit.theta[0]), model.names)
    value = objective(model, x, point, cfg)
    visits = None
    if trace:
        visits = [(tuple(p), float(v)) for p, v in zip(pts, gvals[0])]
    return FitResult(point, value, int(fit.evaluations[0]), visits)


def deviance(model: Model, x: Dataset, theta, cfg: ObjectiveConfig, fit: FitResult) -> float:
    """Drop of the objective from its maximum, clamped at zero."""
    return max(fit.objective_value - objective(model, x, theta, cfg), 0.0)
