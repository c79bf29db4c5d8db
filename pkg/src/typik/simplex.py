"""Nelder-Mead simplex minimization over a batch of independent problems.

Each row ``b`` of the batch is its own problem; rows never influence each
other, so a batch of one gives the same iterates as any larger batch.
Trial points outside the box are reflected back across the violated bound
and then clipped.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

# reflection, expansion, contraction, shrink
_R, _E, _C, _S = 1.0, 2.0, 0.5, 0.5


@dataclass
class SimplexResult:
    x: np.ndarray  # (B, d)
    fun: np.ndarray  # (B,)
    nfev: np.ndarray  # (B,)
    nit: np.ndarray  # (B,)


def reflect_into_box(p: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    p = np.where(p < lo, lo + (lo - p), p)
    p = np.where(p > hi, hi - (p - hi), p)
    return np.clip(p, lo, hi)


def _spread(a: np.ndarray, ref: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        d = np.abs(a - ref)
    return np.where(np.isnan(d), 0.0, d)


def minimize_batch(
    fun: Callable[[np.ndarray, np.ndarray], np.ndarray],
    x0: np.ndarray,
    step: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    max_iter: int = 400,
    xtol: float = 1e-8,
    ftol: float = 1e-8,
) -> SimplexResult:
    """Minimize ``fun(rows, points)`` independently for each row of ``x0``.

    ``fun`` receives the row indices being evaluated and a ``(len(rows), d)``
    array of points and returns one value per point.  ``step`` sets the
    initial simplex edge along each coordinate.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    B, d = x0.shape
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (d,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (d,))
    step = np.broadcast_to(np.asarray(step, dtype=float), (d,))
    rows = np.arange(B)

    verts = np.repeat(x0[:, None, :], d + 1, axis=1)
    for i in range(d):
        up = x0[:, i] + step[i]
        verts[:, i + 1, i] = np.where(up <= hi[i], up, x0[:, i] - step[i])
    verts = reflect_into_box(verts, lo, hi)
    fvals = np.empty((B, d + 1))
    for i in range(d + 1):
        fvals[:, i] = fun(rows, verts[:, i, :])
    nfev = np.full(B, d + 1)
    nit = np.zeros(B, dtype=int)
    active = np.ones(B, dtype=bool)

    for _ in range(max_iter):
        order = np.argsort(fvals, axis=1, kind="stable")
        verts = np.take_along_axis(verts, order[:, :, None], axis=1)
        fvals = np.take_along_axis(fvals, order, axis=1)
        xspread = _spread(verts[:, 1:, :], verts[:, :1, :]).max(axis=(1, 2))
        fspread = _spread(fvals[:, 1:], fvals[:, :1]).max(axis=1)
        active &= ~((xspread <= xtol) & (fspread <= ftol))
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        nit[idx] += 1
        v = verts[idx]
        f = fvals[idx]
        best, second_worst, worst = f[:, 0], f[:, d - 1], f[:, d]
        centroid = v[:, :d, :].mean(axis=1)
        xw = v[:, d, :]
        xr = reflect_into_box(centroid + _R * (centroid - xw), lo, hi)
        fr = fun(idx, xr)
        nfev[idx] += 1

        expand = fr < best
        accept_r = (fr >= best) & (fr < second_worst)
        outside = (fr >= second_worst) & (fr < worst)
        inside = fr >= worst
        x2 = np.where(
            expand[:, None],
            centroid + _E * (centroid - xw),
            np.where(outside[:, None], centroid + _C * (xr - centroid), centroid + _C * (xw - centroid)),
        )
        x2 = reflect_into_box(x2, lo, hi)
        need2 = ~accept_r
        f2 = np.full(idx.size, np.inf)
        if need2.any():
            f2[need2] = fun(idx[need2], x2[need2])
            nfev[idx[need2]] += 1

        new_x = xr.copy()
        new_f = fr.copy()
        take2 = (expand & (f2 < fr)) | (outside & (f2 <= fr)) | (inside & (f2 < worst))
        new_x[take2] = x2[take2]
        new_f[take2] = f2[take2]
        shrink = (outside & ~(f2 <= fr)) | (inside & ~(f2 < worst))
        keep = ~shrink
        v[keep, d, :] = new_x[keep]
        f[keep, d] = new_f[keep]
        if shrink.any():
            s_rows = np.flatnonzero(shrink)
            vs = v[s_rows]
            vs[:, 1:, :] = vs[:, :1, :] + _S * (vs[:, 1:, :] - vs[:, :1, :])
            v[s_rows] = vs
            for i in range(1, d + 1):
                f[s_rows, i] = fun(idx[s_rows], vs[:, i, :])
            nfev[idx[s_rows]] += d
        verts[idx] = v
        fvals[idx] = f

    order = np.argsort(fvals, axis=1, kind="stable")
    first = order[:, 0]
    return SimplexResult(verts[rows, first, :], fvals[rows, first], nfev, nit)
