import sys
from pathlib import Path

import numpy as np
import pytest

# Ensure repo root is importable
REPO_ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO_ROOT))

from core.correlation import CorrelationKind, CorrelationModel, Location  # noqa: E402
from core.kriging import SampleSet  # noqa: E402

FIXTURES = Path(__file__).resolve().parent / "fixtures"


def random_model(rng: np.random.Generator, kind: CorrelationKind) -> CorrelationModel:
    sigma2 = float(rng.choice([0.5, 1.0, 2.0]))
    if kind is CorrelationKind.WHITE_NOISE:
        return CorrelationModel(kind, sigma2=sigma2)
    nugget = float(rng.uniform(0.05, 0.3))
    return CorrelationModel(kind, sigma2=sigma2, range=float(rng.uniform(0.2, 0.5)), nugget=nugget)


def random_samples(rng: np.random.Generator, n: int, d: int = 2) -> SampleSet:
    pts = rng.uniform(0.0, 1.0, size=(n, d))
    return SampleSet(tuple(Location(tuple(p)) for p in pts), tuple(rng.normal(3.0, 2.0, size=n)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES
