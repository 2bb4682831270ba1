import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats
from scipy.integrate import trapezoid
from hypothesis import given, settings, strategies as st

from errors import StepOutOfRange, GridTooCoarse, EmptyObservations
from model import ModelParams, param_sequences
from kalman import kalman_filter
from dobrovidov import GridSpec, predictive_sequence, log_predictive_density, score_ratio, score_ratios, \
    total_log_likelihood, dobrovidov_score_form, dobrovidov_recursive, direct_weights, dobrovidov_direct, \
    grid_bayes_oracle
from simulate import simulate
from util import Method
from conftest import random_params


class TestPredictiveSequence:
    def test_first_step_is_marginal(self, canonical):
        predictive = predictive_sequence(canonical, [1.0])[0]
        assert predictive.mean == 0.0
        assert predictive.variance == pytest.approx(2.0)
        assert predictive.ell == 0.0

    def test_second_step(self, canonical):
        predictive = predictive_sequence(canonical, [1.0, -3.0])[1]
        assert predictive.mean == pytest.approx(0.25, rel=1e-14)
        assert predictive.variance == pytest.approx(1.875, rel=1e-14)

    def test_zero_observations(self, canonical):
        assert np.all(predictive_sequence(canonical, np.zeros(10)).mean == 0.0)

    def test_variance_bounded_below(self, param_sweep):
        for params in param_sweep:
            assert np.all(predictive_sequence(params, np.ones(50)).variance >= params.B ** 2)

    def test_empty(self, canonical):
        with pytest.raises(EmptyObservations):
            predictive_sequence(canonical, [])


class TestLogPredictiveDensity:
    def test_canonical_value(self, canonical):
        expected = -0.5 * math.log(2 * math.pi * 1.875) - 0.25 ** 2 / (2 * 1.875)
        assert log_predictive_density(canonical, [1.0, 0.0], 2) == pytest.approx(expected, rel=1e-14)

    def test_at_predictive_mean(self, canonical):
        assert log_predictive_density(canonical, [1.0, 0.25], 2) == pytest.approx(-0.5 * math.log(2 * math.pi * 1.875))

    def test_step_out_of_range(self, canonical):
        for k in (0, 3):
            with pytest.raises(StepOutOfRange):
                log_predictive_density(canonical, [1.0, 0.0], k)

    def test_densities_integrate_to_one(self, canonical):
        xs = simulate(canonical, 50, seed=8).x
        predictive = predictive_sequence(canonical, xs)
        for k in range(1, 51):
            mean, sd = predictive.mean[k - 1], math.sqrt(predictive.variance[k - 1])
            # the density at the observed point agrees with the predictive parameters
            assert log_predictive_density(canonical, xs, k) == pytest.approx(
                stats.norm.logpdf(xs[k - 1], loc=mean, scale=sd), rel=1e-12)
            grid = np.linspace(mean - 10 * sd, mean + 10 * sd, 10_000)
            density = np.exp(stats.norm.logpdf(grid, loc=mean, scale=sd))
            assert trapezoid(density, grid) == pytest.approx(1.0, abs=1e-8)

    def test_total_log_likelihood(self, canonical):
        xs = [1.0, 0.0, -0.5]
        assert total_log_likelihood(canonical, xs) == pytest.approx(
            sum(log_predictive_density(canonical, xs, k) for k in (1, 2, 3)), rel=1e-13)


class TestScoreRatio:
    def test_canonical_value(self, canonical):
        assert score_ratio(canonical, [1.0, 0.0], 2) == pytest.approx(0.25 / 1.875, rel=1e-14)

    def test_zero_at_mean(self, canonical):
        assert score_ratio(canonical, [1.0, 0.25], 2) == pytest.approx(0.0, abs=1e-15)

    def test_step_out_of_range(self, canonical):
        with pytest.raises(StepOutOfRange):
            score_ratio(canonical, [1.0], 2)

    def test_matches_finite_difference(self, param_sweep):
        h = 1e-5
        for seed, params in enumerate(param_sweep[:20]):
            xs = simulate(params, 30, seed=seed).x
            for k in (1, 2, 15, 30):
                predictive = predictive_sequence(params, xs)
                # move x_k away from the predictive mean so the score is not near zero
                xs[k - 1] = predictive.mean[k - 1] + 1.5 * math.sqrt(predictive.variance[k - 1])
                up, down = xs.copy(), xs.copy()
                up[k - 1] += h
                down[k - 1] -= h
                difference = (log_predictive_density(params, up, k) - log_predictive_density(params, down, k)) / (2 * h)
                analytic = -(xs[k - 1] - predictive.mean[k - 1]) / predictive.variance[k - 1]
                assert score_ratio(params, xs, k) == pytest.approx(analytic, rel=1e-12)
                assert difference == pytest.approx(analytic, rel=1e-6)

    def test_score_ratios_vectorized(self, canonical):
        xs = [1.0, 0.0, 2.0]
        assert_allclose(score_ratios(canonical, xs), [score_ratio(canonical, xs, k) for k in (1, 2, 3)], rtol=1e-14)


class TestEstimators:
    def test_recursive_canonical(self, canonical):
        run = dobrovidov_recursive(canonical, [1.0, 0.5])
        assert run.method == Method.DOBROVIDOV
        assert_allclose(run.estimates, [0.5, 0.36666666666666664], rtol=1e-14)
        assert_allclose(run.aux, [2.0, 1.875], rtol=1e-14)

    def test_recursive_zeros(self, canonical):
        assert np.all(dobrovidov_recursive(canonical, np.zeros(10)).estimates == 0.0)

    def test_single_observation(self, param_sweep):
        for params in param_sweep:
            seq = param_sequences(params, 1)
            expected = params.A * seq.kappa[0] * 0.7 / seq.sigma[0]
            assert dobrovidov_recursive(params, [0.7]).estimates[0] == pytest.approx(expected, rel=1e-14)
            assert kalman_filter(params, [0.7]).estimates[0] == pytest.approx(expected, rel=1e-14)

    def test_direct_weights_canonical(self, canonical):
        assert_allclose(direct_weights(canonical, 2), [0.13333333333333333, 0.4666666666666667], rtol=1e-14)
        assert dobrovidov_direct(canonical, [1.0, 0.5]).estimates[-1] == pytest.approx(0.36666666666666664)

    def test_weight_sum_bounded(self, param_sweep):
        for params in param_sweep:
            for n in (1, 2, 10, 100):
                weights = direct_weights(params, n)
                assert params.A * np.sum(weights) <= 1.0
                assert np.sum(np.abs(params.A * weights)) <= 1.0

    def test_weight_decay(self, param_sweep):
        for params in param_sweep:
            seq = param_sequences(params, 40)
            weights = direct_weights(params, 40)
            ratios = np.abs(weights[:-1] / weights[1:])
            # |a| gamma_i / kappa_{i+1}, below |a| since gamma_i < stationary variance
            assert_allclose(ratios, abs(params.a) * seq.gamma[:-1] / seq.kappa[1:], rtol=1e-12)
            assert np.all(ratios < abs(params.a))

    def test_score_form_is_the_filter(self, canonical):
        xs = simulate(canonical, 100, seed=4).x
        run = dobrovidov_score_form(canonical, xs)
        assert run.method == Method.DOBROVIDOV_SCORE
        expected = canonical.B ** 2 / canonical.A * score_ratios(canonical, xs) + xs / canonical.A
        assert_allclose(run.estimates, expected, rtol=1e-14)


@given(seed=st.integers(min_value=0, max_value=2 ** 32 - 1), n=st.integers(min_value=1, max_value=300))
@settings(deadline=None, max_examples=40)
def test_three_forms_agree(seed, n):
    generator = np.random.default_rng(seed)
    params = random_params(generator, min_abs_a=0.0)
    xs = generator.normal(scale=generator.uniform(0.1, 10.0), size=n)
    scale = np.max(np.abs(xs)) / abs(params.A)
    recursive = dobrovidov_recursive(params, xs).estimates
    assert np.max(np.abs(dobrovidov_direct(params, xs).estimates - recursive)) <= 1e-12 * scale
    assert np.max(np.abs(dobrovidov_score_form(params, xs).estimates - recursive)) <= 1e-12 * scale


class TestGridOracle:
    def test_canonical(self, canonical):
        run = grid_bayes_oracle(canonical, [1.0, 0.5], GridSpec(half_width_sds=8.0, points=2001))
        assert run.method == Method.GRID
        assert_allclose(run.estimates, kalman_filter(canonical, [1.0, 0.5]).estimates, atol=1e-4)
        assert_allclose(run.aux, [0.5, 0.4666666666666667], atol=1e-4)

    @pytest.mark.parametrize('a, b, A, B', [(0.5, 0.75 ** 0.5, 1.0, 1.0), (-0.6, 1.0, 2.0, 0.5),
                                            (0.9, 0.3, -1.0, 1.0), (0.2, 2.0, 0.5, 1.5)])
    def test_first_posterior_mean(self, a, b, A, B):
        params = ModelParams(a=a, b=b, A=A, B=B)
        seq = param_sequences(params, 1)
        run = grid_bayes_oracle(params, [0.3])
        assert run.estimates[0] == pytest.approx(params.A * seq.kappa[0] * 0.3 / seq.sigma[0], abs=1e-6)

    def test_length_twenty(self, canonical):
        xs = simulate(canonical, 20, seed=12).x
        assert np.max(np.abs(grid_bayes_oracle(canonical, xs).estimates - kalman_filter(canonical, xs).estimates)) \
            <= 1e-4

    @pytest.mark.parametrize('grid', [GridSpec(8.0, 499), GridSpec(8.0, 1000), GridSpec(5.0, 2001)])
    def test_grid_settings_checked(self, canonical, grid):
        with pytest.raises(ValueError):
            grid_bayes_oracle(canonical, [1.0], grid)

    def test_observation_outside_grid(self, canonical):
        with pytest.raises(GridTooCoarse) as info:
            grid_bayes_oracle(canonical, [0.1, 1000.0])
        assert info.value.step == 2
