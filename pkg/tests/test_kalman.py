import numpy as np
import pytest
from numpy.testing import assert_allclose
from hypothesis import given, settings, strategies as st

from errors import EmptyObservations
from model import ModelParams, param_sequences, steady_state
from kalman import KalmanState, FilterRun, kalman_init, kalman_step, kalman_filter
from dobrovidov import dobrovidov_recursive
from simulate import simulate
from util import Method
from conftest import random_params


class TestKalmanInit:
    def test_canonical(self, canonical):
        state = kalman_init(canonical, 1.0)
        assert state.estimate == pytest.approx(0.5)
        assert state.gamma == pytest.approx(0.5)
        assert state.step == 1

    def test_zero_observation(self, param_sweep):
        assert all(kalman_init(params, 0.0).estimate == 0.0 for params in param_sweep)

    def test_independent_chain(self):
        assert kalman_init(ModelParams(a=0.0, b=1.0, A=1.0, B=1.0), 2.0).estimate == pytest.approx(1.0)


class TestKalmanStep:
    def test_canonical_second_step(self, canonical):
        state = kalman_step(canonical, KalmanState(estimate=0.5, gamma=0.5, step=1), 0.5)
        assert state.estimate == pytest.approx(0.36666666666666664, rel=1e-14)
        assert state.gamma == pytest.approx(0.4666666666666667, rel=1e-14)
        assert state.step == 2

    def test_raw_form_matches(self, canonical):
        start = KalmanState(estimate=0.5, gamma=0.5, step=1)
        kappa_sigma, raw = kalman_step(canonical, start, 0.5), kalman_step(canonical, start, 0.5, raw=True)
        assert raw.estimate == pytest.approx(kappa_sigma.estimate, rel=1e-14)
        assert raw.gamma == pytest.approx(kappa_sigma.gamma, rel=1e-14)

    def test_zero_in_zero_out(self, canonical):
        assert kalman_step(canonical, KalmanState(estimate=0.0, gamma=0.5, step=1), 0.0).estimate == 0.0


class TestKalmanFilter:
    def test_canonical(self, canonical):
        run = kalman_filter(canonical, [1.0, 0.5])
        assert run.method == Method.KALMAN
        assert_allclose(run.estimates, [0.5, 0.36666666666666664], rtol=1e-14)
        assert_allclose(run.aux, [0.5, 0.4666666666666667], rtol=1e-14)

    def test_zeros(self, canonical):
        assert np.all(kalman_filter(canonical, np.zeros(20)).estimates == 0.0)

    def test_empty(self, canonical):
        with pytest.raises(EmptyObservations):
            kalman_filter(canonical, [])

    def test_steady_state_gamma(self, canonical):
        run = kalman_filter(canonical, simulate(canonical, 200, seed=1).x)
        assert abs(run.aux[-1] - steady_state(canonical).gamma) <= 1e-10

    def test_gamma_matches_kappa_sigma(self, param_sweep):
        for params in param_sweep[:20]:
            run = kalman_filter(params, np.ones(300))
            seq = param_sequences(params, 300)
            assert_allclose(run.aux, params.B ** 2 * seq.kappa / seq.sigma, rtol=1e-12)
            gamma = run.aux
            sigma_tilde_sq = params.stationary_variance
            assert np.all((gamma > 0) & (gamma < sigma_tilde_sq + params.b ** 2))

    def test_raw_form_agrees(self, param_sweep, rng):
        for params in param_sweep[:20]:
            xs = rng.normal(size=200)
            assert_allclose(kalman_filter(params, xs, raw=True).estimates, kalman_filter(params, xs).estimates,
                            rtol=1e-10, atol=1e-12)

    def test_filter_run_length_check(self):
        with pytest.raises(ValueError):
            FilterRun(method=Method.KALMAN, estimates=np.zeros(2), aux=np.zeros(3))


def test_equivalence_with_predictive_density_filter(param_sweep):
    for seed, params in enumerate(param_sweep):
        xs = simulate(params, 500, seed=seed).x
        kalman, dobrovidov = kalman_filter(params, xs), dobrovidov_recursive(params, xs)
        assert np.max(np.abs(kalman.estimates - dobrovidov.estimates)) <= 1e-10 * max(1.0, np.max(np.abs(xs)))


@given(seed=st.integers(min_value=0, max_value=2 ** 32 - 1), scale=st.floats(min_value=-100, max_value=100))
@settings(deadline=None, max_examples=50)
def test_linear_in_observations(seed, scale):
    generator = np.random.default_rng(seed)
    params = random_params(generator, min_abs_a=0.0)
    xs = generator.normal(size=30)
    assert_allclose(kalman_filter(params, scale * xs).estimates, scale * kalman_filter(params, xs).estimates,
                    rtol=1e-12, atol=1e-12 * (1 + abs(scale)))
