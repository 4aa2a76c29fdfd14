import math

import numpy as np
import pytest

from conftest import random_model, random_samples
from core.correlation import CorrelationKind, CorrelationModel, Location, correlation_matrix
from core.errors import ConfigError, InsufficientDataError, SingularSystemError
from core.kriging import SampleSet, build_system, solve_system
from core.mean_gls import (
    gls_mean,
    gls_mean_via_kriging,
    max_discrepancy,
    sample_variance,
    white_noise_report,
)

KINDS = list(CorrelationKind)


def _line(values, spacing=1.0) -> SampleSet:
    return SampleSet(tuple(Location.of(i * spacing) for i in range(len(values))), tuple(values))


def _equicorrelated_pair() -> tuple[CorrelationModel, SampleSet]:
    model = CorrelationModel(CorrelationKind.EXPONENTIAL, sigma2=1.0, range=1.0)
    return model, _line([2.0, 6.0], spacing=math.log(2.0))


def test_white_noise_gls_mean():
    est = gls_mean(CorrelationModel.white_noise(2.0), _line([1.0, 2.0, 3.0, 4.0]))
    np.testing.assert_allclose(est.weights, [0.25] * 4, rtol=0, atol=1e-15)
    assert est.mean == pytest.approx(2.5)
    assert est.xi == pytest.approx(0.125)
    assert est.mse == pytest.approx(0.5)
    assert est.lagrange == pytest.approx(-0.125)
    assert est.n == 4


def test_single_sample_gls_mean():
    est = gls_mean(CorrelationModel.white_noise(3.0), _line([7.5]))
    np.testing.assert_array_equal(est.weights, [1.0])
    assert est.mean == 7.5
    assert est.xi == pytest.approx(0.5)
    assert est.mse == pytest.approx(3.0)


def test_equicorrelated_pair():
    model, samples = _equicorrelated_pair()
    for fn in (gls_mean, gls_mean_via_kriging):
        est = fn(model, samples)
        np.testing.assert_allclose(est.weights, [0.5, 0.5], rtol=1e-12)
        assert est.xi == pytest.approx(0.375, rel=1e-12)
        assert est.mse == pytest.approx(0.75, rel=1e-12)
        assert est.mean == pytest.approx(4.0, rel=1e-12)


def test_kriging_path_white_noise_three():
    model = CorrelationModel.white_noise(1.0)
    samples = _line([3.0, 4.0, 8.0])
    a, b = gls_mean(model, samples), gls_mean_via_kriging(model, samples)
    np.testing.assert_allclose(b.weights, [1 / 3] * 3, rtol=1e-12)
    assert b.xi == pytest.approx(1 / 6, rel=1e-12)
    assert max_discrepancy(a, b) <= 1e-12


def test_weights_are_read_only():
    est = gls_mean(CorrelationModel.white_noise(), _line([1.0, 2.0]))
    with pytest.raises(ValueError):
        est.weights[0] = 3.0


def test_duplicate_locations_raise_singular():
    samples = SampleSet((Location.of(0.0), Location.of(0.0)), (1.0, 2.0))
    model = CorrelationModel(CorrelationKind.GAUSSIAN, sigma2=1.0, range=1.0)
    with pytest.raises(SingularSystemError):
        gls_mean(model, samples)
    with pytest.raises(SingularSystemError):
        gls_mean_via_kriging(model, samples)


def test_path_equivalence_suite(rng):
    for k in range(200):
        model = random_model(rng, KINDS[k % len(KINDS)])
        samples = random_samples(rng, int(rng.integers(1, 51)))
        a, b = gls_mean(model, samples), gls_mean_via_kriging(model, samples)
        assert max_discrepancy(a, b) <= 1e-10, (k, model)

        lam = correlation_matrix(model, samples.locations)
        quad = a.quadratic_mse(lam, model.sigma2)
        assert abs(quad - a.mse) <= 1e-10 * a.mse
        assert a.mse == pytest.approx(2.0 * a.xi * model.sigma2, rel=1e-15)
        assert a.xi > 0
        assert abs(float(np.sum(a.weights)) - 1.0) <= 1e-10


def test_scale_and_shift_equivariance(rng):
    model = random_model(rng, CorrelationKind.SPHERICAL)
    samples = random_samples(rng, 9)
    base = gls_mean(model, samples)

    scaled = SampleSet(samples.locations, tuple(3.0 * v for v in samples.values))
    est = gls_mean(model, scaled)
    np.testing.assert_allclose(est.weights, base.weights, rtol=0, atol=1e-15)
    assert est.xi == base.xi
    assert est.mean == pytest.approx(3.0 * base.mean, rel=1e-12)

    shifted = SampleSet(samples.locations, tuple(v + 10.0 for v in samples.values))
    assert gls_mean(model, shifted).mean == pytest.approx(base.mean + 10.0, rel=1e-12)


def test_white_noise_gls_weights_match_far_target_kriging(rng):
    model = CorrelationModel.white_noise(1.5)
    samples = random_samples(rng, 12)
    gls = gls_mean(model, samples)
    for target in (Location.of(5.0, 5.0), Location.of(-3.0, 0.25)):
        sol = solve_system(build_system(model, samples, target))
        np.testing.assert_allclose(sol.weights, gls.weights, rtol=0, atol=1e-10)


# ---------------------------------------------------------------------------
# sample_variance
# ---------------------------------------------------------------------------

@pytest.mark.parametrize(
    "values, biased, unbiased",
    [
        ([4.2, 4.2, 4.2], 0.0, 0.0),
        ([1.0, 3.0], 1.0, 2.0),
        ([1.0, 2.0, 3.0, 4.0], 1.25, 5.0 / 3.0),
    ],
)
def test_sample_variance_examples(values, biased, unbiased):
    est = sample_variance(values)
    assert est.biased == pytest.approx(biased, abs=1e-15)
    assert est.unbiased == pytest.approx(unbiased, abs=1e-15)
    assert est.n == len(values)


def test_sample_variance_rejects_empty_and_bad_input():
    with pytest.raises(InsufficientDataError):
        sample_variance([])
    with pytest.raises(ConfigError):
        sample_variance([1.0, float("inf")])


def test_single_value_has_biased_variance_only():
    est = sample_variance([4.5])
    assert (est.n, est.mean, est.biased) == (1, 4.5, 0.0)
    with pytest.raises(InsufficientDataError):
        est.unbiased


def test_sample_variance_ratio(rng):
    for _ in range(100):
        n = int(rng.integers(2, 40))
        values = rng.normal(rng.uniform(-100, 100), rng.uniform(0.1, 10), size=n)
        est = sample_variance(values)
        assert est.unbiased >= est.biased
        assert est.unbiased * (n - 1) == pytest.approx(est.biased * n, rel=1e-13)


def test_unbiased_estimator_mean_is_sigma2():
    sigma2, n, trials = 2.0, 5, 10_000
    for seed in (11, 12):
        data = np.random.default_rng(seed).normal(0.0, math.sqrt(sigma2), size=(trials, n))
        unbiased = np.array([sample_variance(row).unbiased for row in data])
        se = unbiased.std(ddof=1) / math.sqrt(trials)
        if abs(unbiased.mean() - sigma2) <= 4 * se:
            return
    pytest.fail(f"mean unbiased variance {unbiased.mean():.4f} vs {sigma2} (se {se:.4f}) on both seeds")


# ---------------------------------------------------------------------------
# white_noise_report
# ---------------------------------------------------------------------------

def test_white_noise_report_examples():
    assert white_noise_report(1, 1.0).kriging_variance == 2.0
    r = white_noise_report(4, 2.0)
    assert (r.kriging_variance, r.estimator_variance, r.lagrange, r.gls_mse) == (2.5, 0.5, -0.25, 0.5)
    big = white_noise_report(10 ** 6, 1.0)
    assert big.kriging_variance == pytest.approx(1.000001, rel=1e-15)
    assert big.estimator_variance == pytest.approx(1e-6, rel=1e-15)


def test_white_noise_report_matches_pipeline():
    for n in (1, 3, 8):
        samples = _line([float(i) for i in range(n)])
        r = white_noise_report(n, 1.0)
        est = gls_mean(CorrelationModel.white_noise(1.0), samples)
        assert est.mse == pytest.approx(r.gls_mse, rel=1e-12)
        assert est.lagrange == pytest.approx(-1.0 / (2 * n), rel=1e-12)


def test_rescaled_kriging_variance_recovers_sigma2():
    # sigma2 (1 + 1/n) * n / (n + 1) collapses back to sigma2
    for sigma2 in (0.5, 1.0, 2.0):
        for n in range(1, 50):
            r = white_noise_report(n, sigma2)
            assert r.kriging_variance * n / (n + 1) == pytest.approx(sigma2, rel=1e-14)


def test_white_noise_report_rejects_bad_arguments():
    with pytest.raises(ConfigError):
        white_noise_report(0, 1.0)
    with pytest.raises(ConfigError):
        white_noise_report(3, -1.0)
