"""Typicality contour, its maxitive extension, and confidence regions.

For a parameter value theta the contour is the probability, under
P_theta, that a replicate dataset has deviance at theta at least as large
as the observed deviance.  It is estimated by Monte Carlo, re-fitting the
objective on every replicate.  For the Stein model the deviance depends on
the data only through ||x||^2, so the probability can also be computed from
the non-central chi-square law without resampling.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from .dist import RngStream, noncentral_chisq_tails
from .errors import DomainError
from .models.base import Dataset, GridAxis, Model, ParamPoint
from .models.stein import Stein
from .objective import (
    FitResult,
    ObjectiveConfig,
    maximize,
    maximize_batch,
    objective_values,
)

__all__ = [
    "DEFAULT_MC_SAMPLES",
    "ContourGrid",
    "ConfidenceRegion",
    "contour_at",
    "contour_grid",
    "typicality_of_set",
    "confidence_region",
    "stein_exact_contour",
    "stein_exact_contour_batch",
]

DEFAULT_MC_SAMPLES = 1000


@dataclass
class ContourGrid:
    model_id: str
    names: tuple
    grid: np.ndarray  # (P, d)
    tau: np.ndarray  # (P,)
    mc_samples: int
    lam: float
    master_seed: int
    theta_check: tuple
    method: str = "mc"
    warnings: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.atleast_2d(np.asarray(self.grid, dtype=float))
        self.tau = np.asarray(self.tau, dtype=float)
        if self.grid.shape[0] != self.tau.size:
            raise DomainError("grid and tau lengths differ")
        if np.any(self.tau < 0) or np.any(self.tau > 1):
            raise DomainError("tau values must lie in [0, 1]")

    @property
    def points(self) -> list[ParamPoint]:
        return [ParamPoint(self.model_id, tuple(p), self.names) for p in self.grid]

    def sidecar(self) -> dict:
        return {
            "model_id": self.model_id,
            "names": list(self.names),
            "lambda": self.lam,
            "M": self.mc_samples,
            "master_seed": self.master_seed,
            "method": self.method,
            "theta_check": list(self.theta_check),
            "warnings": self.warnings,
            "version": __version__,
            **self.meta,
        }

    def write_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([*self.names, "tau"])
            for p, t in zip(self.grid, self.tau):
                w.writerow([repr(float(c)) for c in p] + [repr(float(t))])

    def save(self, path) -> tuple[Path, Path]:
        """Write ``path`` (CSV) and ``path`` with suffix ``.json`` (metadata)."""
        path = Path(path)
        self.write_csv(path)
        side = path.with_suffix(".json")
        side.write_text(json.dumps(self.sidecar(), indent=2, sort_keys=True) + "\n")
        return path, side

    @classmethod
    def load(cls, path) -> "ContourGrid":
        path = Path(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        known = {"model_id", "names", "lambda", "M", "master_seed", "method", "theta_check", "warnings", "version"}
        return cls(
            meta["model_id"],
            tuple(meta["names"]),
            rows[:, :-1],
            rows[:, -1],
            meta["M"],
            meta["lambda"],
            meta["master_seed"],
            tuple(meta["theta_check"]),
            meta.get("method", "mc"),
            meta.get("warnings", 0),
            {k: v for k, v in meta.items() if k not in known},
        )


@dataclass
class ConfidenceRegion:
    alpha: float
    intervals: list  # [(lo, hi), ...] for one-dimensional grids
    points: np.ndarray  # retained grid points
    contains_estimator: bool

    def contains(self, value) -> bool:
        if self.intervals:
            v = float(np.atleast_1d(value)[0])
            return any(lo <= v <= hi for lo, hi in self.intervals)
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return bool(np.any(np.all(np.isclose(self.points, value), axis=1)))


def _replicate_deviances(model: Model, theta: np.ndarray, point: ParamPoint, cfg: ObjectiveConfig, M: int, stream: RngStream):
    streams = [stream.child(m) for m in range(M)]
    stats = model.sample_stats(point, streams)
    fit = maximize_batch(model, stats, cfg)
    at_theta = objective_values(model, stats, np.repeat(theta[None, :], M, axis=0), cfg)
    with np.errstate(invalid="ignore"):
        dev = np.maximum(fit.value - at_theta, 0.0)
    return dev, fit.failed


def _contour_point(model, x_stat, fit_value, theta, cfg, M, stream):
    """(tau, failed replicate count) at one parameter value."""
    observed = max(fit_value - float(objective_values(model, x_stat[None, :], theta[None, :], cfg)[0]), 0.0)
    if observed <= 0.0:
        # replicate deviances are clamped at zero, so every indicator is one
        return 1.0, 0
    point = ParamPoint(model.model_id, tuple(theta), model.names)
    dev, failed = _replicate_deviances(model, theta, point, cfg, M, stream)
    hits = (dev >= observed) | failed
    return float(hits.mean()), int(failed.sum())


def contour_at(
    model: Model,
    x: Dataset,
    theta,
    cfg: ObjectiveConfig,
    M: int = DEFAULT_MC_SAMPLES,
    stream: Optional[RngStream] = None,
    fit: Optional[FitResult] = None,
) -> float:
    """Monte Carlo typicality contour at ``theta``.

    Replicate ``m`` is drawn on ``stream.child(m)`` and re-fitted with the
    grid pinned to the observed data.  Replicates whose fit fails count as
    typical.
    """
    if M < 1:
        raise DomainError("M must be at least 1")
    stream = stream if stream is not None else RngStream(0)
    cfg = cfg.resolved(model, x)
    fit = fit if fit is not None else maximize(model, x, cfg)
    coords = model.as_theta(theta)
    tau, failed = _contour_point(model, model.stat(x), fit.objective_value, coords, cfg, M, stream)
    if failed:
        warnings.warn(f"{failed} replicate fits failed at {tuple(coords)}; counted as typical", RuntimeWarning)
    return tau


def _grid_array(model: Model, grid) -> np.ndarray:
    if isinstance(grid, (list, tuple)) and grid and isinstance(grid[0], GridAxis):
        from .objective import _grid_points

        return _grid_points(grid)
    arr = np.asarray(grid, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.shape[1] != model.dim:
        raise DomainError(f"grid points must have {model.dim} coordinates")
    return arr


def _contour_task(args):
    model, x_stat, fit_value, theta, cfg, M, seed, sid = args
    return _contour_point(model, x_stat, fit_value, theta, cfg, M, RngStream(seed, sid))


def _pmap(fn: Callable, tasks: list, threads: int) -> list:
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    from joblib import Parallel, delayed

    return Parallel(n_jobs=threads)(delayed(fn)(t) for t in tasks)


def contour_grid(
    model: Model,
    x: Dataset,
    grid,
    cfg: ObjectiveConfig,
    M: int = DEFAULT_MC_SAMPLES,
    master_seed: int = 0,
    threads: int = 1,
    method: str = "mc",
) -> ContourGrid:
    """Contour over a grid (axes or an array of points), with the estimate appended.

    Grid point ``i`` uses stream ``(master_seed, i)``, so values do not depend
    on the other grid points or on ``threads``.  ``method="exact"`` is
    available for the Stein model.
    """
    pts = _grid_array(model, grid)
    if pts.shape[0] == 0:
        raise DomainError("empty contour grid")
    for p in pts:
        model.check_theta(p)
    cfg = cfg.resolved(model, x)
    fit = maximize(model, x, cfg)
    check = np.array(fit.theta_check.coords)
    all_pts = np.vstack([pts, check[None, :]])
    n_fail = 0
    if method == "exact":
        if not isinstance(model, Stein):
            raise DomainError("exact contours are available for the Stein model only")
        tau, n_fail = _stein_exact(model, float(model.stat(x)[0]), all_pts[:, 0], cfg, fit.objective_value, M, master_seed)
    elif method == "mc":
        x_stat = model.stat(x)
        tasks = [(model, x_stat, fit.objective_value, p, cfg, M, master_seed, i) for i, p in enumerate(all_pts)]
        out = _pmap(_contour_task, tasks, threads)
        tau = np.array([o[0] for o in out])
        n_fail = sum(o[1] for o in out)
    else:
        raise DomainError(f"unknown contour method {method!r}")
    if model.dim == 1:
        order = np.argsort(all_pts[:, 0], kind="stable")
        all_pts, tau = all_pts[order], np.asarray(tau)[order]
    if n_fail:
        warnings.warn(f"{n_fail} replicate fits failed; counted as typical", RuntimeWarning)
    return ContourGrid(
        model.model_id,
        model.names,
        all_pts,
        tau,
        M,
        cfg.lam,
        master_seed,
        fit.theta_check.coords,
        method,
        n_fail,
    )


def typicality_of_set(cg: ContourGrid, H: Callable[[ParamPoint], bool]) -> float:
    """Supremum of the contour over the grid points selected by ``H``."""
    sel = np.array([bool(H(p)) for p in cg.points])
    if not sel.any():
        raise DomainError("hypothesis selects no grid points")
    return float(cg.tau[sel].max())


def confidence_region(cg: ContourGrid, alpha: float) -> ConfidenceRegion:
    """Grid points with ``tau >= alpha``; 1-D grids also get interpolated intervals."""
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    keep = cg.tau >= alpha
    points = cg.grid[keep]
    check = np.array(cg.theta_check)
    intervals = []
    if cg.grid.shape[1] == 1:
        g = cg.grid[:, 0]
        t = cg.tau
        i = 0
        P = g.size
        while i < P:
            if not keep[i]:
                i += 1
                continue
            j = i
            while j + 1 < P and keep[j + 1]:
                j += 1
            lo = g[i] if i == 0 else _cross(g[i - 1], t[i - 1], g[i], t[i], alpha)
            hi = g[j] if j == P - 1 else _cross(g[j], t[j], g[j + 1], t[j + 1], alpha)
            intervals.append((float(lo), float(hi)))
            i = j + 1
        contains = any(lo <= check[0] <= hi for lo, hi in intervals)
    else:
        contains = bool(np.any(np.all(np.isclose(points, check), axis=1)))
    return ConfidenceRegion(alpha, intervals, points, contains)


def _cross(g0, t0, g1, t1, alpha):
    if t1 == t0:
        return 0.5 * (g0 + g1)
    return g0 + (alpha - t0) * (g1 - g0) / (t1 - t0)


# ---------------------------------------------------------------------------
# Stein: contour from the law of ||X||^2


def _solve_increasing(f, a, b, fa, fb, tol, max_iter=100):
    """Vectorized Illinois method for roots of functions with fa <= 0 <= fb.

    ``f(rows, s)`` evaluates the rows listed.  Returns the roots and a mask of
    rows that met the tolerance.
    """
    a, b, fa, fb = (np.array(v, dtype=float) for v in (a, b, fa, fb))
    root = 0.5 * (a + b)
    done = np.zeros(a.size, dtype=bool)
    side = np.zeros(a.size, dtype=int)
    for _ in range(max_iter):
        idx = np.flatnonzero(~done)
        if idx.size == 0:
            break
        denom = fb[idx] - fa[idx]
        c = np.where(denom > 0, a[idx] - fa[idx] * (b[idx] - a[idx]) / np.where(denom > 0, denom, 1.0), 0.5 * (a[idx] + b[idx]))
        # guard against stalls at an endpoint
        c = np.where((c <= a[idx]) | (c >= b[idx]), 0.5 * (a[idx] + b[idx]), c)
        fc = f(idx, c)
        root[idx] = c
        neg = fc < 0
        ia, ib = idx[neg], idx[~neg]
        a[ia], fa[ia] = c[neg], fc[neg]
        # Illinois: halve the retained endpoint's value after repeats
        fb[ia] = np.where(side[ia] == -1, 0.5 * fb[ia], fb[ia])
        side[ia] = -1
        b[ib], fb[ib] = c[~neg], fc[~neg]
        fa[ib] = np.where(side[ib] == 1, 0.5 * fa[ib], fa[ib])
        side[ib] = 1
        done[idx] = (b[idx] - a[idx] <= tol * np.maximum(1.0, np.abs(c))) | (fc == 0)
    return root, done


def _stein_fit_many(model: Stein, s: np.ndarray, cfg: ObjectiveConfig):
    fit = maximize_batch(model, s[:, None], cfg)
    return fit.theta[:, 0], fit.value


def _stein_exact(model: Stein, s_obs: float, phis: np.ndarray, cfg: ObjectiveConfig, fit_value: float, M: int, seed: int):
    """Exact contour values at ``phis`` plus the number of Monte Carlo fallbacks."""
    n = model.n
    phis = np.asarray(phis, dtype=float)
    P = phis.size
    s_all = np.full(P, s_obs)
    obs = np.maximum(fit_value - objective_values(model, s_all[:, None], phis[:, None], cfg), 0.0)
    tau = np.ones(P)
    work = np.flatnonzero(obs > 0)
    if work.size == 0:
        return tau, 0
    ph = phis[work]
    r_obs = obs[work]

    def rho(rows, s):
        return objective_values(model, s[:, None], ph[rows, None], cfg)

    def dev(rows, s):
        _, g = _stein_fit_many(model, s, cfg)
        return np.maximum(g - rho(rows, s), 0.0)

    def est_minus_phi(rows, s):
        est, _ = _stein_fit_many(model, s, cfg)
        return est - ph[rows]

    s_tiny = 1e-8
    s_big = (np.sqrt(s_obs) + ph + 40.0) ** 2 + 10.0 * n
    all_rows = np.arange(work.size)
    above = est_minus_phi(all_rows, np.full(work.size, s_obs)) > 0  # observed s above the deviance minimum

    # locate the deviance minimum s_star between the observed point and the far end
    lo = np.where(above, s_tiny, s_obs)
    hi = np.where(above, s_obs, s_big)
    f_lo = est_minus_phi(all_rows, lo)
    f_hi = est_minus_phi(all_rows, hi)
    bracket_ok = (f_lo <= 0) & (f_hi >= 0)
    s_star, ok1 = _solve_increasing(est_minus_phi, lo, hi, np.minimum(f_lo, 0), np.maximum(f_hi, 0), 1e-10)
    # where the estimate never reaches phi at the low end (phi near zero), s_star -> 0
    s_star = np.where(f_lo > 0, s_tiny, s_star)
    ok1 = ok1 | (f_lo > 0)

    # other root of dev(s) = r_obs on the far side of s_star
    far = np.where(above, s_tiny, s_big)
    d_far = dev(all_rows, far)
    d_star = dev(all_rows, s_star)
    has_root = d_far >= r_obs
    sign = np.where(above, -1.0, 1.0)  # orient so the function increases along the search
    a = np.where(above, far, s_star)
    b = np.where(above, s_star, far)

    def g_root(rows, s):
        return sign[rows] * (dev(rows, s) - r_obs[rows])

    fa = sign * ((np.where(above, d_far, d_star)) - r_obs)
    fb = sign * ((np.where(above, d_star, d_far)) - r_obs)
    rows = np.flatnonzero(has_root)
    other = np.where(above, 0.0, np.inf)
    ok2 = np.ones(work.size, dtype=bool)
    if rows.size:
        sub_sign = sign[rows]

        def g_sub(r, s):
            return sub_sign[r] * (dev(rows[r], s) - r_obs[rows[r]])

        roots, conv = _solve_increasing(g_sub, a[rows], b[rows], np.minimum(fa[rows], 0), np.maximum(fb[rows], 0), 1e-10)
        other[rows] = roots
        ok2[rows] = conv
    s_lo = np.where(above, other, s_obs)
    s_hi = np.where(above, s_obs, other)
    lower_lo, _ = noncentral_chisq_tails(n, ph * ph, np.where(np.isfinite(s_lo), s_lo, 0.0))
    _, upper_hi = noncentral_chisq_tails(n, ph * ph, np.where(np.isfinite(s_hi), s_hi, 0.0))
    upper_hi = np.where(np.isfinite(s_hi), upper_hi, 0.0)
    lower_lo = np.where(s_lo > 0, lower_lo, 0.0)
    vals = np.clip(lower_lo + upper_hi, 0.0, 1.0)

    bad = ~(ok1 & ok2 & (bracket_ok | (f_lo > 0)))
    fails = 0
    if bad.any():
        warnings.warn(
            f"exact contour root-finding failed at {bad.sum()} points; using Monte Carlo there", RuntimeWarning
        )
        x_stat = np.array([s_obs])
        for i in np.flatnonzero(bad):
            t, f = _contour_point(model, x_stat, fit_value, ph[i : i + 1], cfg, M, RngStream(seed, int(work[i])))
            vals[i] = t
            fails += 1
    tau[work] = vals
    return tau, fails


def _stein_data(s: float, n: int) -> Dataset:
    v = np.zeros(n)
    v[0] = math.sqrt(s)
    return Dataset.vector(v)


def stein_exact_contour_batch(
    s: float, phis: Sequence[float], n: int, cfg: ObjectiveConfig, likelihood: str = "profile"
) -> np.ndarray:
    """Exact contour at several ``phis`` for observed ``s = ||x||^2``."""
    if not s > 0:
        raise DomainError("s must be positive")
    model = Stein(n, likelihood=likelihood)
    x = _stein_data(s, n)
    cfg = cfg.resolved(model, x)
    fit = maximize(model, x, cfg)
    tau, _ = _stein_exact(model, s, np.asarray(phis, dtype=float), cfg, fit.objective_value, DEFAULT_MC_SAMPLES, 0)
    return tau


def stein_exact_contour(s: float, phi: float, n: int, cfg: ObjectiveConfig, likelihood: str = "profile") -> float:
    """P{R(||X||^2, phi) >= R(s, phi)} under ||X||^2 ~ ncx2(n, phi^2), by root-finding."""
    return float(stein_exact_contour_batch(s, [phi], n, cfg, likelihood)[0])
