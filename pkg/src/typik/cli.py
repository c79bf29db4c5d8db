"""Command-line front end: ``typik {fit,contour,confidence,simulate,reproduce}``.

Exit status is 0 on success, 1 for usage errors, 2 for file I/O failures
and 3 for numerical failures.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .contour import DEFAULT_MC_SAMPLES, ContourGrid, confidence_region, contour_grid
from .errors import DomainError, OptimizationError, UsageError
from .harness import EXPERIMENTS, FIGURES, default_config, reproduce, run, synthetic_dataset
from .models import MODELS, GridAxis, load_dataset, make_model
from .objective import ObjectiveConfig, maximize

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3
SUBCOMMANDS = ("fit", "contour", "confidence", "simulate", "reproduce")
_SEED_MAX = 2**64 - 1


@dataclass
class CliInvocation:
    subcommand: str
    model: Optional[str] = None
    data: Optional[Path] = None
    lam: float = 0.0
    lambdas: Optional[tuple] = None
    mc_samples: int = DEFAULT_MC_SAMPLES
    seed: int = 0
    alphas: tuple = (0.05,)
    grid: Optional[tuple] = None
    contour_grid: Optional[tuple] = None
    output: Optional[Path] = None
    fmt: str = "csv"
    threads: int = 1
    gof: str = "default"
    header: bool = False
    true: Optional[tuple] = None
    n: Optional[int] = None
    method: str = "mc"
    target: Optional[str] = None  # experiment or figure id
    reps: Optional[int] = None
    extra: dict = field(default_factory=dict)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"not a finite number: {text!r}")
    return v


def _count(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1: {text!r}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer: {text!r}") from None
    if not 0 <= v <= _SEED_MAX:
        raise argparse.ArgumentTypeError(f"seed out of range: {text!r}")
    return v


def _axis(text: str) -> GridAxis:
    parts = text.split(":")
    if len(parts) not in (3, 4):
        raise argparse.ArgumentTypeError(f"grid must be LO:HI:POINTS[:log], got {text!r}")
    try:
        lo, hi, pts = float(parts[0]), float(parts[1]), int(parts[2])
        return GridAxis(lo, hi, pts, parts[3] if len(parts) == 4 else "linear")
    except (ValueError, DomainError) as exc:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}: {exc}") from None


def _coords(text: str) -> tuple:
    try:
        return tuple(float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"parameter values must be comma-separated numbers: {text!r}") from None


def _common(p: argparse.ArgumentParser, data: bool = True) -> None:
    p.add_argument("--seed", type=_seed, default=None, help="master seed (default: $TYPIK_SEED or 0)")
    p.add_argument("--output", type=Path, default=None)
    p.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
    p.add_argument("--threads", type=_count, default=1)
    p.add_argument("--mc-samples", type=_count, default=DEFAULT_MC_SAMPLES)
    if data:
        p.add_argument("--model", choices=sorted(MODELS), required=True)
        p.add_argument("--data", type=Path, default=None)
        p.add_argument("--header", action="store_true", help="skip one header line in --data")
        p.add_argument("--true", type=_coords, default=None, help="true parameter for synthetic data, e.g. 1,2")
        p.add_argument("--n", type=_count, default=None, help="sample size for synthetic data")
        p.add_argument("--lambda", dest="lam", type=_float, default=0.0)
        p.add_argument("--grid", type=_axis, action="append", default=None, help="search axis, once per coordinate")
        p.add_argument("--gof", choices=("default", "ks-full"), default="default")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="typik", description="Maximum typicality estimation and typicality contours.")
    parser.add_argument("--version", action="version", version=f"typik {__version__}")
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser)
    sub.required = True
    fit = sub.add_parser("fit", help="maximum typicality estimate")
    _common(fit)
    for name in ("contour", "confidence"):
        p = sub.add_parser(name, help="typicality contour" if name == "contour" else "confidence regions")
        _common(p)
        p.add_argument(
            "--contour-grid", type=_axis, action="append", default=None, help="evaluation axis, once per coordinate"
        )
        p.add_argument("--method", choices=("mc", "exact"), default="mc", help="exact is available for stein")
        if name == "confidence":
            p.add_argument("--alpha", type=_float, action="append", default=None)
    simulate = sub.add_parser("simulate", help="run a replication experiment")
    simulate.add_argument("experiment", choices=[e for e in EXPERIMENTS if e in ("ns_bias", "stein_mse", "validity", "coverage")])
    _common(simulate, data=False)
    simulate.add_argument("--model", choices=sorted(MODELS), default=None)
    simulate.add_argument("--true", type=_coords, default=None)
    simulate.add_argument("--lambda", dest="lambdas", type=_float, action="append", default=None)
    simulate.add_argument("--reps", type=_count, default=None)
    simulate.add_argument("--alpha", type=_float, action="append", default=None)
    repro = sub.add_parser("reproduce", help="write the data behind a figure")
    repro.add_argument("figure", choices=FIGURES)
    _common(repro, data=False)
    repro.add_argument("--lambda", dest="lambdas", type=_float, action="append", default=None)
    repro.add_argument("--method", choices=("mc", "exact"), default="exact")
    return parser


_VALUE_FLAGS = ("--grid", "--contour-grid", "--true")


def _attach_negative_values(argv: Sequence[str]) -> list:
    # argparse would read "-1:3:5" or "-0.5,1" as a flag; glue it to its option
    out = []
    it = iter(argv)
    for tok in it:
        if tok in _VALUE_FLAGS:
            nxt = next(it, None)
            if nxt is not None and len(nxt) > 1 and nxt[0] == "-" and (nxt[1].isdigit() or nxt[1] == "."):
                out.append(f"{tok}={nxt}")
                continue
            out.append(tok)
            if nxt is not None:
                out.append(nxt)
            continue
        out.append(tok)
    return out


def parse_args(argv: Sequence[str]) -> CliInvocation:
    """Parse and validate ``argv``; raises :class:`UsageError` on bad input."""
    ns = build_parser().parse_args(_attach_negative_values(argv))
    seed = ns.seed
    if seed is None:
        env = os.environ.get("TYPIK_SEED")
        try:
            seed = _seed(env) if env is not None else 0
        except argparse.ArgumentTypeError as exc:
            raise UsageError(f"TYPIK_SEED: {exc}") from None
    inv = CliInvocation(ns.subcommand, seed=seed, output=ns.output, fmt=ns.fmt, threads=ns.threads, mc_samples=ns.mc_samples)
    if ns.subcommand in ("fit", "contour", "confidence"):
        if ns.lam < 0:
            raise UsageError("--lambda must be nonnegative")
        if ns.data is None and ns.true is None:
            raise UsageError(f"{ns.subcommand} needs --data PATH or a synthetic block (--true THETA [--n N])")
        if ns.data is not None and ns.true is not None:
            raise UsageError("give either --data or --true, not both")
        if ns.gof != "default" and ns.model != "neyman_scott":
            raise UsageError("--gof applies to neyman_scott only")
        inv = replace(
            inv,
            model=ns.model,
            data=ns.data,
            lam=ns.lam,
            grid=tuple(ns.grid) if ns.grid else None,
            gof=ns.gof,
            header=ns.header,
            true=ns.true,
            n=ns.n,
        )
        if ns.subcommand != "fit":
            inv.contour_grid = tuple(ns.contour_grid) if ns.contour_grid else None
            inv.method = ns.method
            if ns.method == "exact" and ns.model != "stein":
                raise UsageError("--method exact is available for stein only")
        if ns.subcommand == "confidence":
            alphas = tuple(ns.alpha) if ns.alpha else (0.05,)
            if any(not 0 < a < 1 for a in alphas):
                raise UsageError("--alpha must lie in (0, 1)")
            inv.alphas = alphas
    elif ns.subcommand == "simulate":
        inv.target = ns.experiment
        inv.model, inv.true, inv.reps = ns.model, ns.true, ns.reps
        inv.lambdas = tuple(ns.lambdas) if ns.lambdas else None
        if inv.lambdas and any(v < 0 for v in inv.lambdas):
            raise UsageError("--lambda must be nonnegative")
        if ns.alpha:
            if any(not 0 < a < 1 for a in ns.alpha):
                raise UsageError("--alpha must lie in (0, 1)")
            inv.alphas = tuple(ns.alpha)
        else:
            inv.alphas = None
    else:
        inv.target = ns.figure
        inv.lambdas = tuple(ns.lambdas) if ns.lambdas else None
        if inv.lambdas and any(v < 0 for v in inv.lambdas):
            raise UsageError("--lambda must be nonnegative")
        inv.method = ns.method
    return inv


# ---------------------------------------------------------------------------


def _model_options(inv: CliInvocation) -> dict:
    return {"gof": inv.gof} if inv.model == "neyman_scott" else {}


def _dataset(inv: CliInvocation):
    calls = {"lecam": "scalar_sample", "neyman_scott": "paired_sample", "stein": "vector_observation"}
    if inv.data is not None:
        try:
            x = load_dataset(inv.data, calls[inv.model], header=inv.header)
        except ValueError as exc:
            # unparsable or misshapen file contents count as input failures
            raise OSError(f"{inv.data}: {exc}") from None
        return make_model(inv.model, x, **_model_options(inv)), x
    opts = _model_options(inv)
    if inv.n is not None:
        opts["n"] = inv.n
    try:
        gen = make_model(inv.model, None, **opts)
        theta = gen.point(inv.true)
    except DomainError as exc:
        raise UsageError(f"--true/--n: {exc}") from None
    x = synthetic_dataset(gen, theta.coords, inv.seed)
    return make_model(inv.model, x, **opts), x


def _objective(inv: CliInvocation, model) -> ObjectiveConfig:
    if inv.grid is not None and len(inv.grid) != model.dim:
        raise UsageError(f"--grid must be given {model.dim} time(s) for {model.model_id}")
    return ObjectiveConfig(lam=inv.lam, grid=inv.grid)


def _meta(inv: CliInvocation, model) -> dict:
    return {
        "model": model.model_id,
        "lambda": inv.lam,
        "M": inv.mc_samples,
        "seed": inv.seed,
        "data": None if inv.data is None else str(inv.data),
        "true": None if inv.true is None else list(inv.true),
        "n": model.n,
        "gof": inv.gof,
        "version": __version__,
    }


def _emit(text: str, path: Optional[Path]) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def _fmt(v: float) -> str:
    return repr(float(v))


def _cmd_fit(inv: CliInvocation) -> int:
    model, x = _dataset(inv)
    cfg = _objective(inv, model).resolved(model, x)
    fit = maximize(model, x, cfg)
    meta = _meta(inv, model)
    if inv.fmt == "json":
        body = {**meta, "theta_check": dict(zip(model.names, fit.theta_check.coords)), "objective": fit.objective_value}
        _emit(json.dumps(body, indent=2, sort_keys=True) + "\n", inv.output)
        return EXIT_OK
    lines = [",".join([*model.names, "objective"]), ",".join([*map(_fmt, fit.theta_check.coords), _fmt(fit.objective_value)])]
    _emit("\n".join(lines) + "\n", inv.output)
    if inv.output is not None:
        inv.output.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _contour_axes(inv: CliInvocation, model, cfg: ObjectiveConfig):
    if inv.contour_grid is not None:
        if len(inv.contour_grid) != model.dim:
            raise UsageError(f"--contour-grid must be given {model.dim} time(s) for {model.model_id}")
        return list(inv.contour_grid)
    # a coarser copy of the search grid keeps the Monte Carlo cost moderate
    pts = 41 if model.dim == 1 else 21
    return [replace(ax, points=min(ax.points, pts)) for ax in cfg.grid]


def _compute_contour(inv: CliInvocation) -> tuple:
    model, x = _dataset(inv)
    cfg = _objective(inv, model).resolved(model, x)
    axes = _contour_axes(inv, model, cfg)
    cg = contour_grid(model, x, axes, cfg, inv.mc_samples, inv.seed, threads=inv.threads, method=inv.method)
    cg.meta.update({k: v for k, v in _meta(inv, model).items() if k not in ("model", "lambda", "M", "seed")})
    cg.meta["seed"] = inv.seed
    return model, cg


def _default_out(inv: CliInvocation, stem: str) -> Path:
    return inv.output if inv.output is not None else Path(f"{stem}_{inv.model}_{inv.seed}.{inv.fmt}")


def _cmd_contour(inv: CliInvocation) -> int:
    _, cg = _compute_contour(inv)
    out = _default_out(inv, "contour")
    if inv.fmt == "json":
        body = {**cg.sidecar(), "grid": cg.grid.tolist(), "tau": cg.tau.tolist()}
        out.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
    else:
        cg.save(out)
    return EXIT_OK


def _cmd_confidence(inv: CliInvocation) -> int:
    model, cg = _compute_contour(inv)
    regions = [confidence_region(cg, a) for a in inv.alphas]
    out = _default_out(inv, "confidence")
    meta = {**cg.sidecar(), "alphas": list(inv.alphas)}
    if model.dim == 1:
        rows = [(r.alpha, lo, hi) for r in regions for lo, hi in r.intervals]
        cols = ("alpha", "lo", "hi")
    else:
        rows = [(r.alpha, *p) for r in regions for p in r.points]
        cols = ("alpha", *model.names)
    if inv.fmt == "json":
        meta["regions"] = [
            {
                "alpha": r.alpha,
                "intervals": [list(iv) for iv in r.intervals],
                "points": r.points.tolist() if model.dim > 1 else [],
                "contains_estimator": r.contains_estimator,
            }
            for r in regions
        ]
        out.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return EXIT_OK
    text = ",".join(cols) + "\n" + "".join(",".join(_fmt(v) for v in row) + "\n" for row in rows)
    out.write_text(text)
    out.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _cmd_simulate(inv: CliInvocation) -> int:
    overrides = {"master_seed": inv.seed, "threads": inv.threads, "M": inv.mc_samples}
    if inv.model is not None:
        overrides["model_id"] = inv.model
        overrides["constants"] = {"n": 100}
        if inv.true is None:
            raise UsageError("--model needs --true for simulate")
    if inv.true is not None:
        overrides["truth"] = inv.true
    if inv.lambdas is not None:
        overrides["lambdas"] = inv.lambdas
    if inv.reps is not None:
        overrides["reps"] = inv.reps
    if inv.alphas is not None:
        overrides["alphas"] = inv.alphas
    if inv.mc_samples == DEFAULT_MC_SAMPLES:
        overrides.pop("M")  # keep the experiment's own default
    try:
        cfg = default_config(inv.target, **overrides)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    report = run(cfg)
    outdir = inv.output if inv.output is not None else Path(".")
    if inv.fmt == "json":
        outdir.mkdir(parents=True, exist_ok=True)
        body = json.loads(report.to_json())
        body["columns"] = list(report.columns)
        body["records"] = report.records.tolist()
        (outdir / f"{cfg.experiment_id}_{cfg.master_seed}.json").write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
    else:
        report.write(outdir)
    return EXIT_OK


def _cmd_reproduce(inv: CliInvocation) -> int:
    outdir = inv.output if inv.output is not None else Path(".")
    reproduce(inv.target, inv.seed, outdir, inv.lambdas, inv.mc_samples, inv.threads, inv.method)
    return EXIT_OK


_COMMANDS = {
    "fit": _cmd_fit,
    "contour": _cmd_contour,
    "confidence": _cmd_confidence,
    "simulate": _cmd_simulate,
    "reproduce": _cmd_reproduce,
}


def execute(inv: CliInvocation) -> int:
    """Run a parsed invocation, mapping failures to exit statuses."""
    try:
        return _COMMANDS[inv.subcommand](inv)
    except UsageError as exc:
        print(f"typik: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"typik: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (OptimizationError, DomainError, FloatingPointError) as exc:
        print(f"typik: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        inv = parse_args(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(f"typik: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return execute(inv)


if __name__ == "__main__":
    sys.exit(main())
