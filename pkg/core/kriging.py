"""Ordinary kriging: the bordered (n+1) x (n+1) system, its solution and predictions.

The unbiasedness constraint sum(w) = 1 enters as the last row and column of
ones; the Lagrange multiplier is the last unknown. Predictions report the
minimized variance of the field under estimation (``kriging_variance``) and
the variance of the estimator itself (``estimator_variance``), each computed
twice: from the Lagrange form and from the quadratic form. The two must
agree or the prediction is rejected.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from core.config import NumericPolicy
from core.correlation import CorrelationModel, Location, check_dimensions, correlation_matrix, correlation_vector
from core.errors import (
    ConfigError,
    DimensionMismatchError,
    InsufficientDataError,
    InternalConsistencyError,
    SingularSystemError,
)
from core.linalg import Factorization, factorize, max_residual

logger = logging.getLogger(__name__)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SampleSet:
    locations: tuple[Location, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        locations = tuple(self.locations)
        values = tuple(float(v) for v in self.values)
        if len(locations) != len(values):
            raise ConfigError(f"SampleSet needs one value per location ({len(locations)} locations, {len(values)} values)")
        if not locations:
            raise InsufficientDataError("SampleSet must hold at least one sample")
        if not all(math.isfinite(v) for v in values):
            raise ConfigError("SampleSet values must be finite")
        d = locations[0].dimension
        for loc in locations[1:]:
            if loc.dimension != d:
                raise DimensionMismatchError(d, loc.dimension)
        object.__setattr__(self, "locations", locations)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def dimension(self) -> int:
        return self.locations[0].dimension

    def value_array(self) -> np.ndarray:
        return np.array(self.values, dtype=float)

    def without(self, index: int) -> "SampleSet":
        keep = [i for i in range(self.n) if i != index]
        return SampleSet(tuple(self.locations[i] for i in keep), tuple(self.values[i] for i in keep))

    def permuted(self, order: Sequence[int]) -> "SampleSet":
        return SampleSet(tuple(self.locations[i] for i in order), tuple(self.values[i] for i in order))


@dataclass(frozen=True)
class KrigingSystem:
    augmented: np.ndarray
    rhs: np.ndarray
    n: int

    @property
    def correlations(self) -> np.ndarray:
        """The Lambda block."""
        return self.augmented[: self.n, : self.n]

    @property
    def target_correlations(self) -> np.ndarray:
        return self.rhs[: self.n]


@dataclass(frozen=True)
class KrigingSolution:
    weights: np.ndarray
    lagrange: float
    residual: float = 0.0
    rcond: float = 1.0


@dataclass(frozen=True)
class Prediction:
    estimate: float
    kriging_variance: float
    estimator_variance: float
    field_variance: float
    solution: KrigingSolution | None = None


def bordered_matrix(correlations: np.ndarray) -> np.ndarray:
    """Border Lambda with a row and column of ones and a zero corner."""
    n = correlations.shape[0]
    a = np.ones((n + 1, n + 1))
    a[:n, :n] = correlations
    a[n, n] = 0.0
    return a


def build_system(model: CorrelationModel, samples: SampleSet, target: Location) -> KrigingSystem:
    check_dimensions(samples.locations[0], target)
    augmented = bordered_matrix(correlation_matrix(model, samples.locations))
    rhs = np.append(correlation_vector(model, samples.locations, target), 1.0)
    return KrigingSystem(augmented=_frozen(augmented), rhs=_frozen(rhs), n=samples.n)


def _coincident_row(system: KrigingSystem) -> int | None:
    """Index of the single Lambda row equal to the rhs head, if exactly one exists."""
    matches = np.flatnonzero(np.all(system.correlations == system.target_correlations, axis=1))
    return int(matches[0]) if len(matches) == 1 else None


def _solve_with(system: KrigingSystem, fac: Factorization, policy: NumericPolicy) -> KrigingSolution:
    n = system.n
    i = _coincident_row(system)
    if i is not None:
        # auto-estimation: the i-th unit vector with mu = 0 solves the system exactly
        x = np.zeros(n + 1)
        x[i] = 1.0
    else:
        x = fac.solve(np.array(system.rhs))

    residual = max_residual(system.augmented, x, system.rhs)
    limit = policy.residual_tol * (1.0 + float(np.max(np.abs(system.rhs))))
    if not residual <= limit:
        raise InternalConsistencyError(
            f"Kriging residual {residual:.3g} exceeds {limit:.3g}", residual=residual
        )
    weights = x[:n]
    drift = abs(float(np.sum(weights)) - 1.0)
    if not drift <= policy.weight_sum_tol:
        raise InternalConsistencyError(
            f"Kriging weights sum to 1 only within {drift:.3g} (tolerance {policy.weight_sum_tol:.3g})",
            weight_sum_error=drift,
        )
    return KrigingSolution(weights=_frozen(weights), lagrange=float(x[n]), residual=residual, rcond=fac.rcond)


def solve_system(system: KrigingSystem, policy: NumericPolicy | None = None) -> KrigingSolution:
    policy = policy or NumericPolicy()
    fac = factorize(system.augmented, policy, what="kriging system")
    return _solve_with(system, fac, policy)


def _agree(a: float, b: float, tol: float, scale: float) -> bool:
    return abs(a - b) <= tol * max(scale, abs(a), abs(b))


def _nonnegative(value: float, sigma2: float, policy: NumericPolicy, name: str) -> float:
    if value >= 0.0:
        return value
    if value > -policy.clamp_tol * sigma2:
        logger.debug("clamped %s round-off %.3g to 0", name, value)
        return 0.0
    raise InternalConsistencyError(f"{name} is negative ({value:.6g})", quantity=name, value=value)


def _prediction(
    model: CorrelationModel,
    samples: SampleSet,
    system: KrigingSystem,
    solution: KrigingSolution,
    policy: NumericPolicy,
) -> Prediction:
    sigma2 = model.sigma2
    w = np.asarray(solution.weights)
    mu = solution.lagrange
    w_rho = float(w @ system.target_correlations)
    w_lam_w = float(w @ system.correlations @ w)

    kriging_variance = sigma2 * (1.0 - (w_rho + mu))
    estimator_variance = sigma2 * (w_rho - mu)
    quad_kriging = sigma2 * (1.0 - 2.0 * w_rho + w_lam_w)
    quad_estimator = sigma2 * w_lam_w

    # the non-negative branch is the only one reachable with the supported models
    if not _agree(kriging_variance, quad_kriging, policy.formula_rel_tol, sigma2):
        raise InternalConsistencyError(
            f"Lagrange-form kriging variance {kriging_variance:.12g} disagrees with quadratic form {quad_kriging:.12g}",
            lagrange_form=kriging_variance,
            quadratic_form=quad_kriging,
        )
    if not _agree(estimator_variance, quad_estimator, policy.formula_rel_tol, sigma2):
        raise InternalConsistencyError(
            f"Lagrange-form estimator variance {estimator_variance:.12g} disagrees with quadratic form {quad_estimator:.12g}",
            lagrange_form=estimator_variance,
            quadratic_form=quad_estimator,
        )

    return Prediction(
        estimate=float(w @ samples.value_array()),
        kriging_variance=_nonnegative(kriging_variance, sigma2, policy, "kriging_variance"),
        estimator_variance=_nonnegative(estimator_variance, sigma2, policy, "estimator_variance"),
        field_variance=sigma2,
        solution=solution,
    )


def predict(
    model: CorrelationModel,
    samples: SampleSet,
    target: Location,
    policy: NumericPolicy | None = None,
) -> Prediction:
    policy = policy or NumericPolicy()
    system = build_system(model, samples, target)
    solution = solve_system(system, policy)
    return _prediction(model, samples, system, solution, policy)


def predict_many(
    model: CorrelationModel,
    samples: SampleSet,
    targets: Sequence[Location],
    workers: int = 1,
    policy: NumericPolicy | None = None,
) -> list[Prediction]:
    """Predict every target against one factorization of the bordered matrix."""
    policy = policy or NumericPolicy()
    for target in targets:
        check_dimensions(samples.locations[0], target)
    augmented = _frozen(bordered_matrix(correlation_matrix(model, samples.locations)))
    fac = factorize(augmented, policy, what="kriging system")

    def one(target: Location) -> Prediction:
        rhs = _frozen(np.append(correlation_vector(model, samples.locations, target), 1.0))
        system = KrigingSystem(augmented=augmented, rhs=rhs, n=samples.n)
        return _prediction(model, samples, system, _solve_with(system, fac, policy), policy)

    if workers <= 1:
        return [one(t) for t in targets]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, targets))


# ---------------------------------------------------------------------------
# Leave-one-out cross validation
# ---------------------------------------------------------------------------

class CrossValidationFold(NamedTuple):
    index: int
    prediction: Prediction
    actual: float

    @property
    def residual(self) -> float:
        return self.actual - self.prediction.estimate


class SkippedFold(NamedTuple):
    index: int
    reason: str


@dataclass(frozen=True)
class CrossValidationReport:
    folds: list[CrossValidationFold]
    skipped: list[SkippedFold]

    @property
    def mean_squared_residual(self) -> float | None:
        if not self.folds:
            return None
        return float(np.mean([f.residual ** 2 for f in self.folds]))

    @property
    def mean_kriging_variance(self) -> float | None:
        if not self.folds:
            return None
        return float(np.mean([f.prediction.kriging_variance for f in self.folds]))

    @property
    def ratio(self) -> float | None:
        msr, mkv = self.mean_squared_residual, self.mean_kriging_variance
        if msr is None or not mkv:
            return None
        return msr / mkv


def cross_validate(
    model: CorrelationModel,
    samples: SampleSet,
    workers: int = 1,
    policy: NumericPolicy | None = None,
) -> CrossValidationReport:
    if samples.n < 2:
        raise InsufficientDataError(f"Cross validation needs at least 2 samples, got {samples.n}")
    policy = policy or NumericPolicy()

    def fold(i: int) -> CrossValidationFold | SkippedFold:
        try:
            pred = predict(model, samples.without(i), samples.locations[i], policy)
        except SingularSystemError as e:
            logger.warning("fold %d skipped: %s", i, e.message)
            return SkippedFold(i, e.message)
        return CrossValidationFold(i, pred, samples.values[i])

    if workers <= 1:
        results = [fold(i) for i in range(samples.n)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fold, range(samples.n)))

    return CrossValidationReport(
        folds=[r for r in results if isinstance(r, CrossValidationFold)],
        skipped=[r for r in results if isinstance(r, SkippedFold)],
    )
