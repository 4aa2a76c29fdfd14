"""Generalized-least-squares estimation of the field mean and the simple-statistics estimators.

The GLS mean is the far-target limit of kriging: every rho_ij vanishes, the
weights become Lambda^-1 F / (F' Lambda^-1 F) with F a vector of ones, and the
mean-squared error of mean estimation is 2 * xi * sigma2 with
xi = 1 / (2 F' Lambda^-1 F).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from core.config import NumericPolicy
from core.correlation import CorrelationModel, correlation_matrix
from core.errors import ConfigError, InsufficientDataError, InternalConsistencyError
from core.kriging import SampleSet, bordered_matrix
from core.linalg import factorize


@dataclass(frozen=True)
class MeanEstimate:
    mean: float
    xi: float
    weights: np.ndarray
    mse: float
    lagrange: float
    n: int

    def quadratic_mse(self, correlations: np.ndarray, sigma2: float) -> float:
        """sigma2 * w' Lambda w, which equals 2 * xi * sigma2."""
        w = np.asarray(self.weights)
        return float(sigma2 * (w @ correlations @ w))


@dataclass(frozen=True)
class VarianceEstimate:
    biased: float
    n: int
    mean: float
    sum_squares: float

    @property
    def unbiased(self) -> float:
        if self.n < 2:
            raise InsufficientDataError("The unbiased (n - 1) variance needs at least 2 values", n=self.n)
        return self.sum_squares / (self.n - 1)


@dataclass(frozen=True)
class WhiteNoiseReport:
    n: int
    sigma2: float
    kriging_variance: float
    estimator_variance: float
    lagrange: float
    gls_mse: float


def _estimate(weights: np.ndarray, xi: float, samples: SampleSet, sigma2: float, policy: NumericPolicy) -> MeanEstimate:
    drift = abs(float(np.sum(weights)) - 1.0)
    if not drift <= policy.weight_sum_tol:
        raise InternalConsistencyError(f"GLS weights sum to 1 only within {drift:.3g}", weight_sum_error=drift)
    if not xi > 0:
        raise InternalConsistencyError(f"xi must be positive for a positive-definite correlation matrix, got {xi:.6g}")
    weights = np.array(weights, dtype=float)
    weights.setflags(write=False)
    return MeanEstimate(
        mean=float(weights @ samples.value_array()),
        xi=xi,
        weights=weights,
        # reported as a magnitude; xi > 0 whenever Lambda is positive definite
        mse=2.0 * xi * sigma2,
        lagrange=-xi,
        n=samples.n,
    )


def gls_mean(model: CorrelationModel, samples: SampleSet, policy: NumericPolicy | None = None) -> MeanEstimate:
    """Solve Lambda x = F once; weights x / F'x, xi = 1 / (2 F'x)."""
    policy = policy or NumericPolicy()
    lam = correlation_matrix(model, samples.locations)
    fac = factorize(lam, policy, what="correlation matrix")
    x = fac.solve(np.ones(samples.n))
    total = float(np.sum(x))
    return _estimate(x / total, 1.0 / (2.0 * total), samples, model.sigma2, policy)


def gls_mean_via_kriging(model: CorrelationModel, samples: SampleSet, policy: NumericPolicy | None = None) -> MeanEstimate:
    """Second path through the bordered kriging matrix with a vanishing rhs head.

    [Lambda 1; 1' 0] [w; nu] = [0; 1] is Lambda w = 2 xi F with F'w = 1,
    so the multiplier slot nu equals -2 xi.
    """
    policy = policy or NumericPolicy()
    augmented = bordered_matrix(correlation_matrix(model, samples.locations))
    fac = factorize(augmented, policy, what="kriging system")
    rhs = np.zeros(samples.n + 1)
    rhs[-1] = 1.0
    x = fac.solve(rhs)
    return _estimate(x[: samples.n], -x[samples.n] / 2.0, samples, model.sigma2, policy)


def max_discrepancy(a: MeanEstimate, b: MeanEstimate) -> float:
    """Largest relative difference across weights, xi, mean and mse."""
    def rel(x: np.ndarray, y: np.ndarray) -> float:
        x, y = np.atleast_1d(x), np.atleast_1d(y)
        scale = np.maximum(1.0, np.maximum(np.abs(x), np.abs(y)))
        return float(np.max(np.abs(x - y) / scale))

    return max(
        rel(np.asarray(a.weights), np.asarray(b.weights)),
        rel(a.xi, b.xi),
        rel(a.mean, b.mean),
        rel(a.mse, b.mse),
    )


def sample_variance(values: Sequence[float]) -> VarianceEstimate:
    """Two-pass sums of squared deviations over n and over n - 1.

    One value is enough for the biased estimate; reading ``unbiased`` then raises.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise InsufficientDataError("sample_variance needs at least one value")
    if not np.all(np.isfinite(v)):
        raise ConfigError("sample_variance values must be finite")
    mean = float(np.mean(v))
    ss = float(np.sum((v - mean) ** 2))
    return VarianceEstimate(biased=ss / v.size, n=int(v.size), mean=mean, sum_squares=ss)


def white_noise_report(n: int, sigma2: float) -> WhiteNoiseReport:
    """Closed forms the numerical pipeline must reproduce for an uncorrelated field."""
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}", flag="--n")
    if not (math.isfinite(sigma2) and sigma2 > 0):
        raise ConfigError(f"sigma2 must be > 0, got {sigma2}", flag="--sigma2")
    return WhiteNoiseReport(
        n=n,
        sigma2=sigma2,
        kriging_variance=sigma2 * (1.0 + 1.0 / n),
        estimator_variance=sigma2 / n,
        lagrange=-1.0 / n,
        gls_mse=sigma2 / n,
    )
