"""Registered models, sampling entry point, and CSV ingestion."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from ..dist import RngStream
from ..errors import DomainError
from .base import DataShape, Dataset, GridAxis, Model, ModelSpec, ParamPoint
from .lecam import DEFAULT_ALPHA, LeCam, lecam_cdf, lecam_gof_pvalue, lecam_loglik, lecam_loglik_parts
from .neyman_scott import NeymanScott, neyman_scott_gof_pvalue, neyman_scott_loglik, neyman_scott_profile
from .stein import Stein, stein_marginal_loglik, stein_mom_estimate, stein_profile_loglik

__all__ = [
    "DataShape",
    "Dataset",
    "GridAxis",
    "Model",
    "ModelSpec",
    "ParamPoint",
    "LeCam",
    "NeymanScott",
    "Stein",
    "MODELS",
    "DEFAULT_ALPHA",
    "make_model",
    "sample",
    "load_dataset",
    "lecam_loglik",
    "lecam_loglik_parts",
    "lecam_cdf",
    "lecam_gof_pvalue",
    "neyman_scott_profile",
    "neyman_scott_loglik",
    "neyman_scott_gof_pvalue",
    "stein_profile_loglik",
    "stein_marginal_loglik",
    "stein_mom_estimate",
]

MODELS = {"lecam": LeCam, "neyman_scott": NeymanScott, "stein": Stein}


def make_model(model_id: str, data: Dataset | None = None, **options) -> Model:
    """Build a registered model, taking its size (and pair means) from ``data`` if given."""
    try:
        cls = MODELS[model_id]
    except KeyError:
        raise DomainError(f"unknown model {model_id!r}; choose from {sorted(MODELS)}") from None
    if data is not None:
        options.setdefault("n", data.n)
        if cls is NeymanScott:
            options.setdefault("xi", data.pairs.mean(axis=1))
    model = cls(**options)
    if data is not None:
        model.check_data(data)
        if data.n != model.n:
            raise DomainError(f"data size {data.n} does not match model size {model.n}")
    return model


def sample(model: Model, theta: ParamPoint, stream: RngStream) -> Dataset:
    """One dataset drawn from ``model`` at ``theta``."""
    return model.sample(theta, stream)


def load_dataset(path, shape: DataShape | str, header: bool = False) -> Dataset:
    """Read a numeric CSV: one column, or two columns for paired samples."""
    shape = DataShape(shape)
    path = Path(path)
    arr = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, ndmin=2, dtype=float)
    if shape is DataShape.PAIRED_SAMPLE:
        if arr.shape[1] != 2:
            raise DomainError(f"{path}: paired data needs two columns, found {arr.shape[1]}")
        return Dataset.paired(arr)
    if arr.shape[1] != 1:
        raise DomainError(f"{path}: expected one column, found {arr.shape[1]}")
    if shape is DataShape.VECTOR_OBSERVATION:
        return Dataset.vector(arr[:, 0])
    return Dataset.scalar(arr[:, 0])
