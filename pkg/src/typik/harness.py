"""Replication experiments and figure-data regeneration.

Replication ``r`` of an experiment draws everything from stream
``(master_seed, r)``: child 0 generates the data, child 1 feeds the
contour replicates and child 2 any nuisance values.  Results therefore do
not depend on the number of worker processes.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .contour import _pmap, confidence_region, contour_at, contour_grid
from .dist import RngStream
from .errors import DomainError, UsageError
from .models import GridAxis, LeCam, NeymanScott, Stein, make_model
from .models.base import Dataset, Model
from .objective import ObjectiveConfig, maximize, objective_values

__all__ = [
    "EXPERIMENTS",
    "FIGURES",
    "DATA_STREAM",
    "ExperimentConfig",
    "SimulationReport",
    "default_config",
    "synthetic_dataset",
    "run",
    "run_ns_bias",
    "run_stein_mse",
    "run_validity",
    "run_coverage",
    "reproduce",
]

EXPERIMENTS = (
    "lecam_surfaces",
    "lecam_profiles",
    "ns_objective",
    "ns_bias",
    "stein_objective",
    "stein_mse",
    "stein_contour",
    "validity",
    "coverage",
)
FIGURES = ("lik_surface", "ks_surface", "ks_profiles", "obj_profiles", "ns_objective", "stein_objective", "stein_contour")

# stream id reserved for one-off synthetic datasets; far above any grid index
DATA_STREAM = 1 << 62
STEIN_PHI = 4.0 * math.sqrt(10.0)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment_id: str
    model_id: Optional[str] = None
    constants: dict = field(default_factory=dict)
    truth: Optional[tuple] = None
    reps: int = 200
    lambdas: tuple = (0.0,)
    M: int = 500
    alphas: tuple = (0.05, 0.10, 0.25)
    inner_points: Optional[int] = None  # override the model's default search-grid size
    contour_method: str = "mc"
    contour_points: int = 25
    contour_halfwidth: float = 6.0
    master_seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.experiment_id not in EXPERIMENTS:
            raise UsageError(f"unknown experiment {self.experiment_id!r}")
        if self.reps < 1:
            raise DomainError("replication count must be at least 1")
        if len(self.lambdas) == 0 or any(not lam >= 0 for lam in self.lambdas):
            raise DomainError("lambda list must be nonempty and nonnegative")
        if self.M < 1:
            raise DomainError("M must be at least 1")
        if any(not 0 < a < 1 for a in self.alphas):
            raise DomainError("alpha levels must lie in (0, 1)")
        object.__setattr__(self, "lambdas", tuple(float(v) for v in self.lambdas))
        object.__setattr__(self, "alphas", tuple(float(v) for v in self.alphas))
        if self.truth is not None:
            object.__setattr__(self, "truth", tuple(float(v) for v in np.atleast_1d(self.truth)))

    def echo(self) -> dict:
        d = asdict(self)
        # thread count never changes results, so it stays out of the outputs
        d.pop("threads")
        d["lambdas"] = list(self.lambdas)
        d["alphas"] = list(self.alphas)
        d["truth"] = None if self.truth is None else list(self.truth)
        return d


def default_config(experiment_id: str, **overrides) -> ExperimentConfig:
    """Configuration of the shipped experiment, with field overrides."""
    base = {
        "ns_bias": dict(model_id="neyman_scott", constants={"n": 100}, truth=(1.0,), reps=500, lambdas=(0, 1, 2, 4, 8)),
        "ns_objective": dict(model_id="neyman_scott", constants={"n": 100}, truth=(1.0,), lambdas=(0, 1, 2, 4, 8)),
        "stein_mse": dict(model_id="stein", constants={"n": 100}, truth=(STEIN_PHI,), reps=200, lambdas=(10,)),
        "stein_objective": dict(model_id="stein", constants={"n": 100}, truth=(STEIN_PHI,), lambdas=(0, 1, 5, 10)),
        "stein_contour": dict(
            model_id="stein", constants={"n": 100}, truth=(STEIN_PHI,), lambdas=(0, 5, 10), contour_method="exact"
        ),
        "validity": dict(
            model_id="stein", constants={"n": 100}, truth=(STEIN_PHI,), reps=400, lambdas=(0, 10), M=500, inner_points=41
        ),
        "coverage": dict(
            model_id="stein",
            constants={"n": 100},
            truth=(STEIN_PHI,),
            reps=200,
            lambdas=(10,),
            contour_method="exact",
            inner_points=41,
        ),
        "lecam_surfaces": dict(model_id="lecam", constants={"n": 100}, truth=(1.0, 2.0), lambdas=(1,)),
        "lecam_profiles": dict(model_id="lecam", constants={"n": 100}, truth=(1.0, 2.0), lambdas=(0, 1)),
    }
    if experiment_id not in base:
        raise UsageError(f"unknown experiment {experiment_id!r}")
    return ExperimentConfig(experiment_id, **{**base[experiment_id], **overrides})


@dataclass
class SimulationReport:
    config: ExperimentConfig
    columns: tuple
    records: np.ndarray  # (reps, len(columns))
    summary: dict
    provenance: dict

    def recompute_summary(self) -> dict:
        return _SUMMARIES[self.config.experiment_id](self.config, self.columns, self.records)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.records:
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        body = {"summary": self.summary, "provenance": self.provenance}
        return json.dumps(body, indent=2, sort_keys=True) + "\n"

    def write(self, outdir) -> tuple[Path, Path]:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        stem = f"{self.config.experiment_id}_{self.config.master_seed}"
        csv_path = outdir / f"{stem}.csv"
        json_path = outdir / f"{stem}.json"
        csv_path.write_text(self.to_csv())
        json_path.write_text(self.to_json())
        return csv_path, json_path


def _provenance(cfg: ExperimentConfig) -> dict:
    return {"config": cfg.echo(), "version": __version__, "master_seed": cfg.master_seed}


def _mean_se(v: np.ndarray) -> tuple[float, float]:
    v = np.asarray(v, dtype=float)
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else float("nan")
    return float(v.mean()), se


def _estimator_summary(values: np.ndarray, truth: float) -> dict:
    mean, se = _mean_se(values)
    err = values - truth
    return {"mean": mean, "se": se, "bias": float(err.mean()), "mse": float(np.mean(err**2))}


def _model_for(cfg: ExperimentConfig, data: Dataset) -> Model:
    # Neyman-Scott picks up the observed pair means as its simulation nuisance
    return make_model(cfg.model_id, data, **cfg.constants)


def _objective_cfg(cfg: ExperimentConfig, model: Model, x: Dataset, lam: float) -> ObjectiveConfig:
    oc = ObjectiveConfig(lam=lam)
    if cfg.inner_points is not None:
        axes = tuple(replace(ax, points=cfg.inner_points) for ax in model.default_grid(x))
        oc = replace(oc, grid=axes)
    return oc.resolved(model, x)


def synthetic_dataset(model: Model, theta, seed: int) -> Dataset:
    """The dataset the command line generates for ``(model, theta, seed)``."""
    return model.sample(model.point(theta), RngStream(seed, DATA_STREAM))


# ---------------------------------------------------------------------------
# Neyman-Scott bias


def _ns_rep(args):
    cfg, r = args
    n = int(cfg.constants.get("n", 100))
    root = RngStream(cfg.master_seed, r)
    xi = root.child(2).normal(n)
    truth = NeymanScott(n, xi=xi)
    x = truth.sample(truth.point(cfg.truth), root.child(0))
    model = _model_for(cfg, x)
    _, mle = _ns_profile(x)
    row = [r, mle]
    for lam in cfg.lambdas:
        row.append(maximize(model, x, _objective_cfg(cfg, model, x, lam)).theta_check.coords[0])
    return row


def _ns_profile(x: Dataset):
    pairs = x.pairs
    xi = pairs.mean(axis=1)
    return xi, float(((pairs - xi[:, None]) ** 2).sum() / (2 * x.n))


def _ns_summary(cfg, columns, records):
    truth = cfg.truth[0]
    out = {"truth": truth, "reps": int(records.shape[0]), "estimators": {}}
    for j, name in enumerate(columns[1:], start=1):
        out["estimators"][name] = _estimator_summary(records[:, j], truth)
    return out


def run_ns_bias(cfg: ExperimentConfig) -> SimulationReport:
    """MLE and typicality estimates of the Neyman-Scott variance over replications."""
    if cfg.model_id != "neyman_scott":
        raise DomainError("run_ns_bias needs the neyman_scott model")
    rows = _pmap(_ns_rep, [(cfg, r) for r in range(cfg.reps)], cfg.threads)
    columns = ("rep", "mle", *(f"check_lambda_{lam:g}" for lam in cfg.lambdas))
    rec = np.array(rows, dtype=float)
    return SimulationReport(cfg, columns, rec, _ns_summary(cfg, columns, rec), _provenance(cfg))


# ---------------------------------------------------------------------------
# Stein mean squared error


def _stein_rep(args):
    cfg, r = args
    n = int(cfg.constants.get("n", 100))
    root = RngStream(cfg.master_seed, r)
    model = Stein(n)
    x = model.sample(model.point(cfg.truth), root.child(0))
    s = float(model.stat(x)[0])
    marg = Stein(n, likelihood="marginal")
    row = [r, math.sqrt(s), math.sqrt(max(s - n, 0.0))]
    row.append(maximize(marg, x, _objective_cfg(cfg, marg, x, 0.0)).theta_check.coords[0])
    for lam in cfg.lambdas:
        row.append(maximize(model, x, _objective_cfg(cfg, model, x, lam)).theta_check.coords[0])
    return row


def run_stein_mse(cfg: ExperimentConfig) -> SimulationReport:
    """Squared-error comparison of length estimators for the Stein model."""
    if cfg.model_id != "stein":
        raise DomainError("run_stein_mse needs the stein model")
    rows = _pmap(_stein_rep, [(cfg, r) for r in range(cfg.reps)], cfg.threads)
    columns = ("rep", "mle", "moment", "marginal", *(f"check_lambda_{lam:g}" for lam in cfg.lambdas))
    rec = np.array(rows, dtype=float)
    return SimulationReport(cfg, columns, rec, _ns_summary(cfg, columns, rec), _provenance(cfg))


# ---------------------------------------------------------------------------
# validity and coverage


def _truth_sample(cfg: ExperimentConfig, root: RngStream) -> Dataset:
    consts = dict(cfg.constants)
    n = int(consts.pop("n", 100))
    if cfg.model_id == "neyman_scott":
        consts.setdefault("xi", root.child(2).normal(n))
    truth = make_model(cfg.model_id, None, n=n, **consts)
    return truth.sample(truth.point(cfg.truth), root.child(0))


def _validity_rep(args):
    cfg, r = args
    root = RngStream(cfg.master_seed, r)
    x = _truth_sample(cfg, root)
    model = _model_for(cfg, x)
    row = [r]
    for k, lam in enumerate(cfg.lambdas):
        oc = _objective_cfg(cfg, model, x, lam)
        row.append(contour_at(model, x, cfg.truth, oc, cfg.M, root.child(1).child(k)))
    return row


def _validity_summary(cfg, columns, records):
    out = {"reps": int(records.shape[0]), "truth": list(cfg.truth), "exceedance": {}}
    R = records.shape[0]
    for j, name in enumerate(columns[1:], start=1):
        table = {}
        for a in cfg.alphas:
            freq = float(np.mean(records[:, j] <= a))
            bound = a + 3.0 * math.sqrt(a * (1 - a) / R)
            table[f"{a:g}"] = {"frequency": freq, "bound": bound, "ok": freq <= bound}
        out["exceedance"][name] = table
    return out


def run_validity(cfg: ExperimentConfig) -> SimulationReport:
    """Distribution of the contour at the true parameter over outer replications."""
    rows = _pmap(_validity_rep, [(cfg, r) for r in range(cfg.reps)], cfg.threads)
    columns = ("rep", *(f"tau_lambda_{lam:g}" for lam in cfg.lambdas))
    rec = np.array(rows, dtype=float)
    return SimulationReport(cfg, columns, rec, _validity_summary(cfg, columns, rec), _provenance(cfg))


def _coverage_rep(args):
    cfg, r = args
    root = RngStream(cfg.master_seed, r)
    x = _truth_sample(cfg, root)
    model = _model_for(cfg, x)
    if model.dim != 1:
        raise DomainError("coverage needs a one-dimensional parameter")
    row = [r]
    truth = cfg.truth[0]
    for k, lam in enumerate(cfg.lambdas):
        oc = _objective_cfg(cfg, model, x, lam)
        est = maximize(model, x, oc).theta_check.coords[0]
        h = cfg.contour_halfwidth
        lo = max(est - h, model.lower[0])
        if cfg.model_id == "neyman_scott":
            lo = max(lo, 0.01 * est)
        grid = np.linspace(lo, est + h, cfg.contour_points)
        cg = contour_grid(model, x, grid, oc, cfg.M, _mix_seed(cfg.master_seed, r, k), method=cfg.contour_method)
        regions = [confidence_region(cg, a) for a in cfg.alphas]
        nested = all(_nested(regions[i], regions[i + 1]) for i in range(len(regions) - 1))
        row.extend(float(reg.contains(truth)) for reg in regions)
        row.append(float(nested))
    return row


def _mix_seed(seed: int, r: int, k: int) -> int:
    # contour grid seed for replication r and lambda index k
    return int(np.random.SeedSequence([seed, r, k, 0xC0FE]).generate_state(2, dtype=np.uint64)[0])


def _nested(small_alpha, large_alpha) -> bool:
    """Region at the larger alpha lies inside the region at the smaller one."""
    return all(any(lo - 1e-12 <= a and b <= hi + 1e-12 for lo, hi in small_alpha.intervals) for a, b in large_alpha.intervals)


def _coverage_summary(cfg, columns, records):
    R = records.shape[0]
    out = {"reps": int(R), "truth": list(cfg.truth), "coverage": {}, "nested_all": bool(np.all(records[:, -1] == 1))}
    for j, name in enumerate(columns[1:-1], start=1):
        c = float(records[:, j].mean())
        out["coverage"][name] = {"coverage": c, "se": math.sqrt(max(c * (1 - c), 0.0) / R)}
    return out


def run_coverage(cfg: ExperimentConfig) -> SimulationReport:
    """Empirical coverage of the interpolated confidence regions."""
    if cfg.model_id not in ("stein", "neyman_scott"):
        raise DomainError("coverage is defined for one-dimensional experiments")
    if len(cfg.lambdas) > 1:
        raise DomainError("coverage runs take a single lambda")
    cfg = replace(cfg, alphas=tuple(sorted(cfg.alphas)))
    rows = _pmap(_coverage_rep, [(cfg, r) for r in range(cfg.reps)], cfg.threads)
    cols = ["rep"]
    for lam in cfg.lambdas:
        cols.extend(f"covered_lambda_{lam:g}_alpha_{a:g}" for a in cfg.alphas)
    columns = (*cols, "nested")
    rec = np.array(rows, dtype=float)
    return SimulationReport(cfg, columns, rec, _coverage_summary(cfg, columns, rec), _provenance(cfg))


_SUMMARIES = {
    "ns_bias": _ns_summary,
    "stein_mse": _ns_summary,
    "validity": _validity_summary,
    "coverage": _coverage_summary,
}


def run(cfg: ExperimentConfig) -> SimulationReport:
    runners = {"ns_bias": run_ns_bias, "stein_mse": run_stein_mse, "validity": run_validity, "coverage": run_coverage}
    if cfg.experiment_id not in runners:
        raise UsageError(f"{cfg.experiment_id} is a figure experiment; use reproduce")
    return runners[cfg.experiment_id](cfg)


# ---------------------------------------------------------------------------
# figure data


def _write_table(path: Path, columns, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


def _lecam_data(seed: int):
    model = LeCam(100)
    x = synthetic_dataset(model, (1.0, 2.0), seed)
    return model, x


def _fig_lecam_surface(seed, what):
    model, x = _lecam_data(seed)
    axes = model.default_grid(x)
    mus, s2s = axes[0].values(), axes[1].values()
    th = np.array([(m, s) for m in mus for s in s2s])
    st = np.repeat(model.stat(x)[None, :], th.shape[0], axis=0)
    if what == "loglik":
        vals = model.loglik(st, th)
        cols = ("mu", "sigma2", "loglik")
    else:
        vals = model.pvalue(st, th)
        cols = ("mu", "sigma2", "pvalue")
    return cols, np.column_stack([th, vals]), {"data_mean": float(x.values.mean())}


def _lecam_profile_points(model, x):
    axes = model.default_grid(x)
    mus, s2s = axes[0].values(), axes[1].values()
    along_mu = np.column_stack([np.zeros_like(mus), mus, np.full_like(mus, 2.0)])
    along_s2 = np.column_stack([np.ones_like(s2s), np.full_like(s2s, 1.0), s2s])
    return np.vstack([along_mu, along_s2])


def _fig_ks_profiles(seed):
    model, x = _lecam_data(seed)
    pts = _lecam_profile_points(model, x)
    st = np.repeat(model.stat(x)[None, :], pts.shape[0], axis=0)
    p = model.pvalue(st, pts[:, 1:])
    # profile 0 varies mu at the true sigma2; profile 1 varies sigma2 at the true mu
    return ("profile", "mu", "sigma2", "pvalue"), np.column_stack([pts, p]), {}


def _fig_obj_profiles(seed, lambdas):
    model, x = _lecam_data(seed)
    pts = _lecam_profile_points(model, x)
    st = np.repeat(model.stat(x)[None, :], pts.shape[0], axis=0)
    rows = []
    for lam in lambdas:
        v = objective_values(model, st, pts[:, 1:], ObjectiveConfig(lam=lam))
        rows.append(np.column_stack([pts, np.full(pts.shape[0], lam), v]))
    return ("profile", "mu", "sigma2", "lambda", "objective"), np.vstack(rows), {}


def _fig_ns_objective(seed, lambdas):
    model = NeymanScott(100)
    x = synthetic_dataset(model, (1.0,), seed)
    grid = np.linspace(0.05, 2.0, 391)
    st = np.repeat(model.stat(x)[None, :], grid.size, axis=0)
    rows = []
    for lam in lambdas:
        v = objective_values(model, st, grid[:, None], ObjectiveConfig(lam=lam))
        rows.append(np.column_stack([grid, np.full(grid.size, lam), v]))
    _, mle = _ns_profile(x)
    return ("sigma2", "lambda", "objective"), np.vstack(rows), {"sigma2_mle": mle}


def _stein_data(seed):
    model = Stein(100)
    x = synthetic_dataset(model, (STEIN_PHI,), seed)
    return model, x


def _fig_stein_objective(seed, lambdas):
    model, x = _stein_data(seed)
    grid = np.linspace(0.0, 30.0, 601)
    st = np.repeat(model.stat(x)[None, :], grid.size, axis=0)
    marg = Stein(100, likelihood="marginal").loglik(st, grid[:, None])
    rows = []
    for lam in lambdas:
        v = objective_values(model, st, grid[:, None], ObjectiveConfig(lam=lam))
        rows.append(np.column_stack([grid, np.full(grid.size, lam), v, marg]))
    r = math.sqrt(float(model.stat(x)[0]))
    return ("phi", "lambda", "objective", "marginal_loglik"), np.vstack(rows), {"norm_x": r}


def _fig_stein_contour(seed, lambdas, M, threads, method):
    model, x = _stein_data(seed)
    grid = np.linspace(5.0, 22.0, 171)
    rows = []
    peaks = {}
    variants = [(lam, model) for lam in lambdas] + [("marginal", Stein(100, likelihood="marginal"))]
    for lam, mdl in variants:
        oc = ObjectiveConfig(lam=0.0 if lam == "marginal" else lam)
        cg = contour_grid(mdl, x, grid, oc, M, seed, threads=threads, method=method)
        code = -1.0 if lam == "marginal" else lam
        rows.append(np.column_stack([cg.grid[:, 0], np.full(cg.tau.size, code), cg.tau]))
        peaks[str(lam)] = cg.theta_check[0]
    r = math.sqrt(float(model.stat(x)[0]))
    # lambda = -1 marks the marginal-likelihood contour
    return ("phi", "lambda", "tau"), np.vstack(rows), {"norm_x": r, "theta_check": peaks, "method": method, "M": M}


def reproduce(
    figure_id: str,
    seed: int = 0,
    outdir=".",
    lambdas: Optional[Sequence[float]] = None,
    M: int = 1000,
    threads: int = 1,
    method: str = "exact",
) -> list[Path]:
    """Write ``{figure_id}_{seed}.csv`` and its JSON sidecar; return both paths."""
    if figure_id not in FIGURES:
        raise UsageError(f"unknown figure {figure_id!r}; choose from {', '.join(FIGURES)}")
    defaults = {
        "obj_profiles": (0.0, 1.0),
        "ns_objective": (0.0, 1.0, 2.0, 4.0, 8.0),
        "stein_objective": (0.0, 1.0, 5.0, 10.0),
        "stein_contour": (0.0, 5.0, 10.0),
    }
    lams = tuple(float(v) for v in (lambdas if lambdas is not None else defaults.get(figure_id, ())))
    if figure_id == "lik_surface":
        cols, rows, meta = _fig_lecam_surface(seed, "loglik")
    elif figure_id == "ks_surface":
        cols, rows, meta = _fig_lecam_surface(seed, "pvalue")
    elif figure_id == "ks_profiles":
        cols, rows, meta = _fig_ks_profiles(seed)
    elif figure_id == "obj_profiles":
        cols, rows, meta = _fig_obj_profiles(seed, lams)
    elif figure_id == "ns_objective":
        cols, rows, meta = _fig_ns_objective(seed, lams)
    elif figure_id == "stein_objective":
        cols, rows, meta = _fig_stein_objective(seed, lams)
    else:
        cols, rows, meta = _fig_stein_contour(seed, lams, M, threads, method)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / f"{figure_id}_{seed}.csv"
    json_path = outdir / f"{figure_id}_{seed}.json"
    _write_table(csv_path, cols, rows)
    side = {"figure_id": figure_id, "seed": seed, "lambdas": list(lams), "version": __version__, **meta}
    json_path.write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")
    return [csv_path, json_path]
