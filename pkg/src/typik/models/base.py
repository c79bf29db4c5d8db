"""Data containers and the model interface used by the optimizer and contour code."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..dist import RngStream
from ..errors import DomainError


class DataShape(str, enum.Enum):
    SCALAR_SAMPLE = "scalar_sample"
    PAIRED_SAMPLE = "paired_sample"
    VECTOR_OBSERVATION = "vector_observation"


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observed data as a flat vector; paired samples are stored pair-major."""

    shape: DataShape
    values: np.ndarray
    n: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        shape = DataShape(self.shape)
        expected = 2 * self.n if shape is DataShape.PAIRED_SAMPLE else self.n
        if values.size != expected or self.n < 1:
            raise DomainError(f"{shape.value} with n={self.n} needs {expected} values, got {values.size}")
        if not np.all(np.isfinite(values)):
            raise DomainError("dataset contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "shape", shape)

    @classmethod
    def scalar(cls, x) -> "Dataset":
        x = np.asarray(x, dtype=float).ravel()
        return cls(DataShape.SCALAR_SAMPLE, x, x.size)

    @classmethod
    def paired(cls, pairs) -> "Dataset":
        pairs = np.asarray(pairs, dtype=float)
        if pairs.ndim != 2 or pairs.shape[1] != 2:
            raise DomainError("paired data must have shape (n, 2)")
        return cls(DataShape.PAIRED_SAMPLE, pairs.ravel(), pairs.shape[0])

    @classmethod
    def vector(cls, x) -> "Dataset":
        x = np.asarray(x, dtype=float).ravel()
        return cls(DataShape.VECTOR_OBSERVATION, x, x.size)

    @property
    def pairs(self) -> np.ndarray:
        if self.shape is not DataShape.PAIRED_SAMPLE:
            raise DomainError("dataset is not a paired sample")
        return self.values.reshape(self.n, 2)

    def __len__(self):
        return self.n


@dataclass(frozen=True)
class ParamPoint:
    model_id: str
    coords: tuple
    names: tuple

    def __post_init__(self):
        coords = tuple(float(c) for c in np.atleast_1d(self.coords))
        names = tuple(self.names)
        if len(coords) != len(names):
            raise DomainError("coords and names differ in length")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "names", names)

    def __getitem__(self, name: str) -> float:
        return self.coords[self.names.index(name)]

    def as_array(self) -> np.ndarray:
        return np.array(self.coords)


@dataclass(frozen=True)
class GridAxis:
    """Evenly spaced axis; ``scale="log"`` spaces points evenly in log(coordinate)."""

    lo: float
    hi: float
    points: int
    scale: str = "linear"

    def __post_init__(self):
        if self.points < 2:
            raise DomainError("grid axes need at least two points")
        if not self.hi > self.lo:
            raise DomainError(f"grid axis needs lo < hi, got {self.lo}, {self.hi}")
        if self.scale not in ("linear", "log"):
            raise DomainError(f"unknown axis scale {self.scale!r}")
        if self.scale == "log" and self.lo <= 0:
            raise DomainError("log-scaled axis needs positive bounds")

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.exp(np.linspace(np.log(self.lo), np.log(self.hi), self.points))
        return np.linspace(self.lo, self.hi, self.points)


@dataclass(frozen=True)
class ModelSpec:
    model_id: str
    param_dim: int
    constants: dict = field(default_factory=dict)
    has_profile_nuisance: bool = False
    has_marginal_loglik: bool = False


class Model:
    """Batched model interface.

    Subclasses work on a fixed-length summary of the data (``stat``) so that
    many datasets and parameter values can be evaluated in one call:
    ``loglik(stats, thetas)`` and ``pvalue(stats, thetas)`` take arrays of
    shape ``(B, k)`` and ``(B, d)`` and return shape ``(B,)``.
    """

    model_id: str = ""
    names: tuple = ()
    data_shape: DataShape = DataShape.SCALAR_SAMPLE
    lower: tuple = ()
    upper: tuple = ()
    scales: tuple = ()

    @property
    def dim(self) -> int:
        return len(self.names)

    @property
    def spec(self) -> ModelSpec:
        raise NotImplementedError

    def stat(self, data: Dataset) -> np.ndarray:
        raise NotImplementedError

    def loglik(self, stats: np.ndarray, thetas: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def pvalue(self, stats: np.ndarray, thetas: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sample(self, theta: ParamPoint, stream: RngStream) -> Dataset:
        raise NotImplementedError

    def default_grid(self, data: Dataset) -> list[GridAxis]:
        raise NotImplementedError

    def check_data(self, data: Dataset) -> None:
        if data.shape is not self.data_shape:
            raise DomainError(f"model {self.model_id} expects {self.data_shape.value}, got {data.shape.value}")

    def point(self, coords: Sequence[float]) -> ParamPoint:
        """Validated parameter point for this model."""
        coords = np.atleast_1d(np.asarray(coords, dtype=float))
        if coords.size != self.dim:
            raise DomainError(f"{self.model_id} takes {self.dim} parameters, got {coords.size}")
        self.check_theta(coords)
        return ParamPoint(self.model_id, tuple(coords), self.names)

    def check_theta(self, coords: np.ndarray) -> None:
        for c, lo, hi, name, scale in zip(coords, self.lower, self.upper, self.names, self.scales):
            if not np.isfinite(c):
                raise DomainError(f"{name} must be finite")
            # log-scaled coordinates live on an open interval
            if c < lo or c > hi or (scale == "log" and c <= 0):
                raise DomainError(f"{name}={c} outside [{lo}, {hi}]")

    def as_theta(self, theta) -> np.ndarray:
        if isinstance(theta, ParamPoint):
            if theta.model_id != self.model_id:
                raise DomainError(f"parameter for {theta.model_id} passed to {self.model_id}")
            theta = theta.coords
        coords = np.atleast_1d(np.asarray(theta, dtype=float))
        if coords.size != self.dim:
            raise DomainError(f"{self.model_id} takes {self.dim} parameters, got {coords.size}")
        self.check_theta(coords)
        return coords

    def sample_stats(self, theta: ParamPoint, streams: Sequence[RngStream]) -> np.ndarray:
        """Summaries of one simulated dataset per stream, stacked to ``(len(streams), k)``."""
        return np.stack([self.stat(self.sample(theta, s)) for s in streams])
