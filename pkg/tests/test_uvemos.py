"""Univariate EMOS fit, prediction, and sampling tests."""

import numpy as np
import pytest
from scipy.stats import truncnorm

from enspost.errors import DegeneratePredictiveError, ParameterError
from enspost.normal import truncnorm_cdf, truncnorm_ppf
from enspost.scoring import crps_ensemble, crps_normal, crps_truncnormal
from enspost.uvemos import (
    NORMAL,
    TRUNCATED_NORMAL,
    UnivariateEmosParams,
    UnivariatePredictive,
    fit_univariate_emos,
    predict,
    sample_q,
    sample_r,
)


def synthetic_training(n=500, m=20, seed=0, a=2.0, noise_sd=0.5):
    """Observations are a + xbar + noise: truth a, sum(b) = 1, var = noise_sd^2."""
    gen = np.random.default_rng(seed)
    base = gen.normal(0.0, 2.0, size=n)
    members = base[:, None] + gen.normal(0.0, 1.0, size=(n, m))
    obs = a + members.mean(axis=1) + gen.normal(0.0, noise_sd, size=n)
    return list(zip(members, obs))


class TestFit:
    def test_recovers_known_truth(self):
        training = synthetic_training(seed=42)
        params = fit_univariate_emos(training, NORMAL, exchangeable=True)
        assert params.a == pytest.approx(2.0, rel=0.10)
        assert params.b.sum() == pytest.approx(1.0, rel=0.10)
        mean_s2 = np.mean([np.var(m) for m, _ in training])
        assert params.c + params.d * mean_s2 == pytest.approx(0.25, rel=0.10)
        assert params.diagnostics.converged

    def test_exchangeable_coefficients_equal(self):
        params = fit_univariate_emos(synthetic_training(n=60), NORMAL, exchangeable=True)
        assert len(set(params.b)) == 1

    def test_beats_raw_ensemble_crps_on_training(self):
        training = synthetic_training(n=120, seed=3)
        params = fit_univariate_emos(training, NORMAL, exchangeable=True)
        fitted = np.mean(
            [crps_normal(d.mu, d.sigma, y) for (mem, y), d in
             ((pair, predict(params, pair[0])) for pair in training)]
        )
        raw = np.mean([crps_ensemble(mem, y) for mem, y in training])
        assert fitted <= raw

    def test_truncated_family_requires_nonnegative_obs(self):
        training = [(np.array([1.0, 2.0, 3.0]), -0.5)] * 12
        with pytest.raises(ParameterError):
            fit_univariate_emos(training, TRUNCATED_NORMAL)

    def test_minimum_training_size(self):
        training = synthetic_training(n=5)
        with pytest.raises(ParameterError):
            fit_univariate_emos(training, NORMAL)

    def test_truncated_fit_on_wind_like_data(self):
        gen = np.random.default_rng(9)
        base = np.abs(gen.normal(5.0, 1.5, size=200))
        members = np.abs(base[:, None] + gen.normal(0, 0.8, size=(200, 10)))
        obs = np.abs(base + gen.normal(0, 0.7, size=200))
        params = fit_univariate_emos(list(zip(members, obs)), TRUNCATED_NORMAL)
        assert params.family == TRUNCATED_NORMAL
        fitted = np.mean(
            [crps_truncnormal(predict(params, m).mu, predict(params, m).sigma, y)
             for m, y in zip(members, obs)]
        )
        raw = np.mean([crps_ensemble(m, y) for m, y in zip(members, obs)])
        assert fitted <= raw

    def test_training_objective_trace_non_increasing(self):
        training = synthetic_training(n=80, seed=5)
        params = fit_univariate_emos(training, NORMAL, trace_iterations=True)
        trace = np.array(params.diagnostics.trace)
        assert len(trace) > 1
        assert np.all(np.diff(trace) <= 1e-12)

    def test_location_shift_refit(self):
        # shifting members and observations by delta moves the bias by
        # delta * (1 - sum(b)) and leaves the spread parameters alone
        training = synthetic_training(n=400, seed=11)
        params = fit_univariate_emos(training, NORMAL)
        delta = 6.0
        shifted = [(m + delta, y + delta) for m, y in training]
        params2 = fit_univariate_emos(shifted, NORMAL)
        expected_a = params.a + delta * (1.0 - params.b.sum())
        assert params2.a == pytest.approx(expected_a, abs=0.05)
        assert params2.b.sum() == pytest.approx(params.b.sum(), abs=0.02)


class TestPredict:
    def test_parameter_plug_in(self):
        m = 4
        params = UnivariateEmosParams(0.0, np.full(m, 1.0 / m), 1.0, 0.0, NORMAL, True)
        members = np.array([1.0, 2.0, 3.0, 4.0])
        dist = predict(params, members)
        assert dist.mu == pytest.approx(members.mean())
        assert dist.sigma == pytest.approx(1.0)

    def test_constant_ensemble_uses_c(self):
        params = UnivariateEmosParams(0.0, np.full(3, 1 / 3), 4.0, 1.0, NORMAL, True)
        dist = predict(params, np.array([2.0, 2.0, 2.0]))
        assert dist.sigma == pytest.approx(2.0)

    def test_constant_ensemble_with_zero_c_degenerate(self):
        params = UnivariateEmosParams(0.0, np.full(3, 1 / 3), 0.0, 1.0, NORMAL, True)
        with pytest.raises(DegeneratePredictiveError):
            predict(params, np.array([2.0, 2.0, 2.0]))


class TestSampleQ:
    def test_standard_normal_three_quantiles(self):
        dist = UnivariatePredictive(NORMAL, 0.0, 1.0)
        np.testing.assert_allclose(sample_q(dist, 3), [-0.6744898, 0.0, 0.6744898], atol=1e-5)

    def test_single_draw_is_median(self):
        dist = UnivariatePredictive(NORMAL, 3.5, 2.0)
        np.testing.assert_allclose(sample_q(dist, 1), [3.5])

    def test_affine_equivariance(self):
        base = sample_q(UnivariatePredictive(NORMAL, 0.0, 1.0), 9)
        scaled = sample_q(UnivariatePredictive(NORMAL, -1.5, 2.5), 9)
        np.testing.assert_allclose(scaled, -1.5 + 2.5 * base, rtol=1e-12)

    def test_strictly_increasing(self):
        dist = UnivariatePredictive(TRUNCATED_NORMAL, 1.0, 2.0)
        draws = sample_q(dist, 40)
        assert np.all(np.diff(draws) > 0)

    def test_empirical_cdf_ks_bound(self):
        # scheme-Q output has Kolmogorov distance exactly <= 1/(N+1)
        from scipy.special import ndtr

        dist = UnivariatePredictive(NORMAL, 1.0, 3.0)
        for n in (5, 20, 100):
            draws = sample_q(dist, n)
            cdf = ndtr((draws - 1.0) / 3.0)
            ecdf_hi = np.arange(1, n + 1) / n
            ecdf_lo = np.arange(0, n) / n
            dist_ks = max(np.max(np.abs(cdf - ecdf_hi)), np.max(np.abs(cdf - ecdf_lo)))
            assert dist_ks <= 1.0 / (n + 1) + 1e-12


class TestSampleR:
    def test_fixed_seed_bit_identical(self):
        dist = UnivariatePredictive(NORMAL, 0.0, 1.0)
        a = sample_r(dist, 64, np.random.default_rng(123))
        b = sample_r(dist, 64, np.random.default_rng(123))
        np.testing.assert_array_equal(a, b)

    def test_truncated_support(self):
        dist = UnivariatePredictive(TRUNCATED_NORMAL, -3.0, 1.0)
        draws = sample_r(dist, 2000, np.random.default_rng(5))
        assert np.all(draws >= 0)

    def test_monte_carlo_mean(self):
        dist = UnivariatePredictive(NORMAL, 0.0, 1.0)
        draws = sample_r(dist, 100_000, np.random.default_rng(7))
        assert abs(draws.mean()) < 0.02


class TestTruncatedNormalHelpers:
    @pytest.mark.parametrize("mu, sigma", [(0.0, 1.0), (-3.0, 1.0), (2.0, 0.5), (-1.0, 4.0)])
    def test_ppf_cdf_round_trip(self, mu, sigma):
        u = np.arange(0.01, 1.0, 0.01)
        x = truncnorm_ppf(u, mu, sigma)
        np.testing.assert_allclose(truncnorm_cdf(x, mu, sigma), u, atol=1e-10)

    def test_matches_scipy(self):
        mu, sigma = 1.3, 2.1
        ref = truncnorm(-mu / sigma, np.inf, loc=mu, scale=sigma)
        u = np.array([0.05, 0.3, 0.6, 0.95])
        np.testing.assert_allclose(truncnorm_ppf(u, mu, sigma), ref.ppf(u), rtol=1e-9)
