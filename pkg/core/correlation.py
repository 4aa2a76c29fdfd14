"""Parametric correlation functions rho(h) and the field scale sigma2."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from core.errors import ConfigError, DimensionMismatchError

MAX_DIMENSION = 3


class CorrelationKind(str, Enum):
    WHITE_NOISE = "white_noise"
    EXPONENTIAL = "exponential"
    GAUSSIAN = "gaussian"
    SPHERICAL = "spherical"


@dataclass(frozen=True)
class Location:
    coords: tuple[float, ...]

    def __post_init__(self):
        coords = tuple(float(c) for c in self.coords)
        if not 1 <= len(coords) <= MAX_DIMENSION:
            raise ConfigError(f"Location must have 1..{MAX_DIMENSION} coordinates, got {len(coords)}")
        if not all(math.isfinite(c) for c in coords):
            raise ConfigError(f"Location coordinates must be finite, got {coords}")
        object.__setattr__(self, "coords", coords)

    @property
    def dimension(self) -> int:
        return len(self.coords)

    @classmethod
    def of(cls, *coords: float) -> "Location":
        return cls(tuple(coords))


@dataclass(frozen=True)
class CorrelationModel:
    kind: CorrelationKind
    sigma2: float
    range: float | None = None
    nugget: float = 0.0

    def __post_init__(self):
        try:
            kind = CorrelationKind(self.kind)
        except ValueError:
            choices = ", ".join(k.value for k in CorrelationKind)
            raise ConfigError(f"Unknown correlation model '{self.kind}' (choose from {choices})", flag="--model")
        object.__setattr__(self, "kind", kind)

        if not (math.isfinite(self.sigma2) and self.sigma2 > 0):
            raise ConfigError(f"sigma2 must be a finite value > 0, got {self.sigma2}", flag="--sigma2")
        if not (math.isfinite(self.nugget) and 0.0 <= self.nugget < 1.0):
            raise ConfigError(f"nugget must lie in [0, 1), got {self.nugget}", flag="--nugget")
        if kind is CorrelationKind.WHITE_NOISE:
            object.__setattr__(self, "range", None)
        elif self.range is None or not (math.isfinite(self.range) and self.range > 0):
            raise ConfigError(f"range must be a finite value > 0 for the {kind.value} model, got {self.range}", flag="--range")

    @classmethod
    def white_noise(cls, sigma2: float = 1.0) -> "CorrelationModel":
        return cls(CorrelationKind.WHITE_NOISE, sigma2)

    def rho(self, h: np.ndarray | float) -> np.ndarray:
        """Evaluate rho on an array of non-negative distances."""
        h = np.asarray(h, dtype=float)
        if self.kind is CorrelationKind.WHITE_NOISE:
            return np.where(h == 0.0, 1.0, 0.0)

        t = h / self.range
        if self.kind is CorrelationKind.EXPONENTIAL:
            shape = np.exp(-t)
        elif self.kind is CorrelationKind.GAUSSIAN:
            shape = np.exp(-(t ** 2))
        else:
            # 1 - 1.5t + 0.5t^3 in factored form, non-negative under rounding
            shape = np.where(t < 1.0, 0.5 * (1.0 - t) ** 2 * (2.0 + t), 0.0)
        # nugget only scales h > 0 so the diagonal stays exactly 1
        return np.where(h == 0.0, 1.0, (1.0 - self.nugget) * shape)


def _coords(locs: Sequence[Location]) -> np.ndarray:
    dims = {loc.dimension for loc in locs}
    if len(dims) > 1:
        lo, hi = min(dims), max(dims)
        raise DimensionMismatchError(lo, hi)
    return np.array([loc.coords for loc in locs], dtype=float)


def _distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # one expression for matrices and vectors: a target placed on a sample
    # reproduces that sample's matrix row bit-for-bit
    return np.sqrt(np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=-1))


def check_dimensions(a: Location, b: Location) -> None:
    if a.dimension != b.dimension:
        raise DimensionMismatchError(a.dimension, b.dimension)


def correlation(model: CorrelationModel, a: Location, b: Location) -> float:
    check_dimensions(a, b)
    h = math.dist(a.coords, b.coords)
    return float(model.rho(h))


def correlation_matrix(model: CorrelationModel, locs: Sequence[Location]) -> np.ndarray:
    """n x n symmetric correlation matrix with an exactly unit diagonal."""
    pts = _coords(locs)
    dist = _distances(pts, pts)
    return model.rho(dist)


def correlation_vector(model: CorrelationModel, locs: Sequence[Location], target: Location) -> np.ndarray:
    """The rho_ij column between every sample and one target."""
    pts = _coords(locs)
    if pts.shape[1] != target.dimension:
        raise DimensionMismatchError(pts.shape[1], target.dimension, what="samples and target")
    dist = _distances(pts, np.array([target.coords]))[:, 0]
    return model.rho(dist)
