"""Seeded Gaussian field simulation and empirical checks of the kriging variances.

Replicates are drawn in fixed-size blocks. Block ``b`` draws from its own
substream ``SeedSequence(seed, spawn_key=(1, b))`` and the layout stream uses
``spawn_key=(0,)``, so a report depends only on the config and never on how
many lanes processed the blocks. Partial statistics are merged in block order.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.linalg import LinAlgError, cholesky

from core.config import NumericPolicy, load_budget
from core.correlation import CorrelationKind, CorrelationModel, Location, correlation_matrix
from core.errors import BudgetExceededError, ConfigError, ContractViolationError, NotPositiveDefiniteError
from core.kriging import SampleSet, predict

logger = logging.getLogger(__name__)

MAX_SEED = 2 ** 64 - 1
_LAYOUT_STREAM = 0
_REPLICATE_STREAM = 1


class Layout(str, Enum):
    UNIT_GRID = "unit_grid"
    RANDOM_UNIFORM = "random_uniform"


def _default_max_draws() -> int:
    return int(load_budget()["simulation"]["max_draws"])


@dataclass(frozen=True)
class SimulationConfig:
    seed: int
    replicates: int
    n: int
    model: CorrelationModel
    mean: float = 0.0
    layout: Layout = Layout.UNIT_GRID
    bbox: tuple[tuple[float, ...], tuple[float, ...]] = ((0.0, 0.0), (1.0, 1.0))
    target: Location | None = None
    block_size: int = 4096
    lanes: int = 1
    max_draws: int = field(default_factory=_default_max_draws)

    def __post_init__(self):
        object.__setattr__(self, "layout", Layout(self.layout))
        lo, hi = (tuple(float(c) for c in corner) for corner in self.bbox)
        object.__setattr__(self, "bbox", (lo, hi))
        if not 0 <= self.seed <= MAX_SEED:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}", flag="--seed")
        if self.replicates < 1:
            raise ConfigError(f"replicates must be >= 1, got {self.replicates}", flag="--replicates")
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}", flag="--n")
        if not math.isfinite(self.mean):
            raise ConfigError(f"mean must be finite, got {self.mean}", flag="--mean")
        if len(lo) != len(hi) or not 1 <= len(lo) <= 3:
            raise ConfigError("bounding box corners must share a dimension of 1..3", flag="--bbox")
        if any(not b > a for a, b in zip(lo, hi)):
            raise ConfigError(f"bounding box upper corner must exceed lower corner, got {lo} / {hi}", flag="--bbox")
        if self.target is not None and self.target.dimension != len(lo):
            raise ConfigError(
                f"target dimension {self.target.dimension} differs from bounding box dimension {len(lo)}", flag="--target"
            )
        if self.block_size < 1 or self.lanes < 1:
            raise ConfigError("block_size and lanes must be >= 1")

    @property
    def dimension(self) -> int:
        return len(self.bbox[0])

    @property
    def draws(self) -> int:
        return self.replicates * self.n

    def require_budget(self) -> None:
        if self.draws > self.max_draws:
            raise BudgetExceededError(
                f"replicates x n = {self.draws} draws exceeds the budget of {self.max_draws}",
                flag="--replicates",
                draws=self.draws,
                budget=self.max_draws,
            )


@dataclass(frozen=True)
class McReport:
    n: int
    replicates: int
    empirical_mse_prediction: float
    empirical_estimator_variance: float
    analytic_kriging_variance: float
    analytic_estimator_variance: float
    standard_error: float
    estimator_standard_error: float
    passed_prediction: bool
    passed_estimator: bool

    @property
    def passed(self) -> bool:
        return self.passed_prediction and self.passed_estimator


class RunningStats:
    """Count, mean and sum of squared deviations; mergeable across blocks."""

    def __init__(self, count: int = 0, mean: float = 0.0, m2: float = 0.0):
        self.count = count
        self.mean = mean
        self.m2 = m2

    @classmethod
    def of(cls, values: np.ndarray) -> "RunningStats":
        if values.size == 0:
            return cls()
        mean = float(np.mean(values))
        return cls(int(values.size), mean, float(np.sum((values - mean) ** 2)))

    def merge(self, other: "RunningStats") -> "RunningStats":
        if other.count == 0:
            return self
        if self.count == 0:
            return other
        count = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / count
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / count
        return RunningStats(count, mean, m2)

    def sem(self) -> float:
        if self.count < 2:
            return 0.0
        return math.sqrt(self.m2 / (self.count - 1) / self.count)


# ---------------------------------------------------------------------------
# Layouts
# ---------------------------------------------------------------------------

def sample_locations(config: SimulationConfig) -> list[Location]:
    lo, hi = config.bbox
    d = config.dimension
    if config.layout is Layout.UNIT_GRID:
        side = 1
        while side ** d < config.n:
            side += 1
        points = itertools.islice(itertools.product(range(side), repeat=d), config.n)
        return [Location(tuple(a + p for a, p in zip(lo, pt))) for pt in points]

    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(_LAYOUT_STREAM,)))
    pts = rng.uniform(lo, hi, size=(config.n, d))
    return [Location(tuple(row)) for row in pts]


def default_target(config: SimulationConfig) -> Location:
    lo, hi = config.bbox
    if config.layout is Layout.UNIT_GRID:
        # half a lattice step off the first grid node, never on a node
        return Location(tuple(a + 0.5 for a in lo))
    return Location(tuple((a + b) / 2.0 for a, b in zip(lo, hi)))


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Sampler:
    factor: np.ndarray
    diagonal: np.ndarray | None
    columns: np.ndarray
    mean: float

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        z = rng.standard_normal((size, self.factor.shape[0]))
        if self.diagonal is not None:
            unique = self.mean + z * self.diagonal
        else:
            unique = self.mean + z @ self.factor.T
        return unique[:, self.columns]


def _sampler(model: CorrelationModel, locations: Sequence[Location], mean: float) -> _Sampler:
    coords = np.array([loc.coords for loc in locations], dtype=float)
    unique, columns = np.unique(coords, axis=0, return_inverse=True)
    cov = model.sigma2 * correlation_matrix(model, [Location(tuple(row)) for row in unique])
    try:
        factor = cholesky(cov, lower=True, check_finite=False)
    except LinAlgError as e:
        raise NotPositiveDefiniteError(
            f"Covariance of the {model.kind.value} model over these locations is not positive definite: {e}",
            model=model.kind.value,
        )
    diagonal = np.diagonal(factor).copy() if np.count_nonzero(factor - np.diag(np.diagonal(factor))) == 0 else None
    return _Sampler(factor=factor, diagonal=diagonal, columns=np.asarray(columns).reshape(-1), mean=mean)


def _block_sizes(config: SimulationConfig) -> list[int]:
    full, rest = divmod(config.replicates, config.block_size)
    return [config.block_size] * full + ([rest] if rest else [])


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_REPLICATE_STREAM, block)))


def _map_blocks(config: SimulationConfig, fn) -> list:
    blocks = list(enumerate(_block_sizes(config)))
    if config.lanes <= 1:
        return [fn(b, size) for b, size in blocks]
    with ThreadPoolExecutor(max_workers=config.lanes) as pool:
        return list(pool.map(lambda item: fn(*item), blocks))


def simulate_field(config: SimulationConfig, locations: Sequence[Location]) -> np.ndarray:
    """replicates x len(locations) jointly Gaussian draws; the last column is the target by convention."""
    draws = config.replicates * len(locations)
    if draws > config.max_draws:
        raise BudgetExceededError(
            f"{draws} draws exceeds the budget of {config.max_draws}", flag="--replicates", draws=draws, budget=config.max_draws
        )
    sampler = _sampler(config.model, locations, config.mean)
    parts = _map_blocks(config, lambda b, size: sampler.draw(_block_rng(config.seed, b), size))
    return np.vstack(parts)


def _passes(empirical: float, analytic: float, se: float, multiplier: float) -> bool:
    if se == 0.0:
        return abs(empirical - analytic) <= 1e-12 * max(1.0, abs(analytic))
    return abs(empirical - analytic) <= multiplier * se


def verify_prediction_variance(
    config: SimulationConfig,
    target: Location | None = None,
    policy: NumericPolicy | None = None,
) -> McReport:
    """Empirical E{(V_j - V^_j)^2} and E{(V^_j - m)^2} against the kriging analytics."""
    policy = policy or NumericPolicy()
    config.require_budget()
    target = target or config.target or default_target(config)
    locations = sample_locations(config)

    # weights depend only on geometry; the analytic quantities come from the kriging module
    analytic = predict(config.model, SampleSet(tuple(locations), (0.0,) * config.n), target, policy)
    weights = np.asarray(analytic.solution.weights)
    sampler = _sampler(config.model, list(locations) + [target], config.mean)
    n = config.n

    def block(b: int, size: int) -> tuple[RunningStats, RunningStats]:
        draws = sampler.draw(_block_rng(config.seed, b), size)
        v_hat = draws[:, :n] @ weights
        return RunningStats.of((draws[:, n] - v_hat) ** 2), RunningStats.of((v_hat - config.mean) ** 2)

    pred_stats, est_stats = RunningStats(), RunningStats()
    for pred_part, est_part in _map_blocks(config, block):
        pred_stats = pred_stats.merge(pred_part)
        est_stats = est_stats.merge(est_part)

    se_pred, se_est = pred_stats.sem(), est_stats.sem()
    report = McReport(
        n=n,
        replicates=config.replicates,
        empirical_mse_prediction=pred_stats.mean,
        empirical_estimator_variance=est_stats.mean,
        analytic_kriging_variance=analytic.kriging_variance,
        analytic_estimator_variance=analytic.estimator_variance,
        standard_error=se_pred,
        estimator_standard_error=se_est,
        passed_prediction=_passes(pred_stats.mean, analytic.kriging_variance, se_pred, policy.se_multiplier),
        passed_estimator=_passes(est_stats.mean, analytic.estimator_variance, se_est, policy.se_multiplier),
    )
    logger.debug("n=%d replicates=%d mse=%.6g (analytic %.6g)", n, config.replicates,
                 report.empirical_mse_prediction, report.analytic_kriging_variance)
    return report


def check_schedule(
    reports: Sequence[McReport],
    sigma2: float,
    white_noise: bool,
    policy: NumericPolicy | None = None,
) -> list[str]:
    """Violations of the asymptotic contract over an increasing n schedule."""
    policy = policy or NumericPolicy()
    violations: list[str] = []
    for prev, cur in zip(reports, reports[1:]):
        slack = policy.schedule_se_multiplier * math.hypot(prev.estimator_standard_error, cur.estimator_standard_error)
        if cur.empirical_estimator_variance > prev.empirical_estimator_variance + slack:
            violations.append(
                f"estimator variance rose from n={prev.n} ({prev.empirical_estimator_variance:.6g}) "
                f"to n={cur.n} ({cur.empirical_estimator_variance:.6g})"
            )
    if white_noise:
        for prev, cur in zip(reports, reports[1:]):
            if not cur.analytic_kriging_variance < prev.analytic_kriging_variance:
                violations.append(f"analytic kriging variance does not decrease from n={prev.n} to n={cur.n}")
        for r in reports:
            if r.analytic_kriging_variance <= sigma2:
                violations.append(f"analytic kriging variance at n={r.n} is not above sigma2")
            if r.empirical_mse_prediction < sigma2 - policy.se_multiplier * r.standard_error:
                violations.append(
                    f"empirical prediction MSE at n={r.n} ({r.empirical_mse_prediction:.6g}) falls below sigma2"
                )
    return violations


def verify_asymptotics(
    base_config: SimulationConfig,
    n_schedule: Sequence[int],
    target: Location | None = None,
    policy: NumericPolicy | None = None,
) -> list[McReport]:
    if not n_schedule:
        raise ConfigError("schedule must name at least one sample count", flag="--schedule")
    if any(b <= a for a, b in zip(n_schedule, n_schedule[1:])):
        raise ConfigError(f"schedule must be strictly increasing, got {list(n_schedule)}", flag="--schedule")
    configs = [replace(base_config, n=int(n)) for n in n_schedule]
    for cfg in configs:
        cfg.require_budget()

    reports = [verify_prediction_variance(cfg, target, policy) for cfg in configs]
    white = base_config.model.kind is CorrelationKind.WHITE_NOISE
    violations = check_schedule(reports, base_config.model.sigma2, white, policy)
    if violations:
        err = ContractViolationError("Asymptotic schedule contract violated: " + "; ".join(violations), violations=violations)
        err.reports = reports
        raise err
    return reports
