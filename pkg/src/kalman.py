from dataclasses import dataclass

import numpy as np

from logger import LOGGER
from errors import EmptyObservations
from model import ModelParams
from util import Method

__all__ = ['KalmanState', 'FilterRun', 'kalman_init', 'kalman_step', 'kalman_filter', 'as_observations']


@dataclass(frozen=True)
class KalmanState:
    estimate: float  # E(S_n | x_1..x_n)
    gamma: float     # conditional error variance gamma_n
    step: int        # n, 1-based


@dataclass(frozen=True)
class FilterRun:
    method: Method
    estimates: np.ndarray
    aux: np.ndarray  # gamma_n or sigma_n per step, see Method.aux_name

    def __post_init__(self):
        if len(self.aux) != len(self.estimates):
            raise ValueError(f'{self.method}: {len(self.estimates)} estimates but {len(self.aux)} aux values')

    def __len__(self):
        return len(self.estimates)

    def __str__(self):
        return f'[FilterRun {self.method} ({len(self)} steps)]'


def as_observations(xs) -> np.ndarray:
    """
    Observation sequence as a 1-D float array
    :param xs: observations x_1..x_n
    :return: numpy array, raises EmptyObservations when there are none
    """
    xs = np.asarray(xs, dtype=np.float64).reshape(-1)
    if len(xs) == 0:
        raise EmptyObservations()
    return xs


def kalman_init(params: ModelParams, x1: float) -> KalmanState:
    s_sq = params.stationary_variance
    denominator = params.A ** 2 * s_sq + params.B ** 2
    return KalmanState(estimate=params.A * s_sq * x1 / denominator, gamma=params.B ** 2 * s_sq / denominator, step=1)


def kalman_step(params: ModelParams, state: KalmanState, x_next: float, raw: bool = False) -> KalmanState:
    """
    One Kalman update from step n to n + 1
    :param params: model parameters
    :param state: filter state at step n
    :param x_next: observation x_{n+1}
    :param raw: evaluate the textbook form (gain numerator A b^2 + a^2 A gamma_n over B^2 + A^2 b^2 + A^2 a^2 gamma_n)
                instead of the kappa / sigma form
    :return: filter state at step n + 1
    """
    a, b_sq, A, B_sq = params.a, params.b ** 2, params.A, params.B ** 2
    if raw:
        denominator = B_sq + A * A * b_sq + A * A * a * a * state.gamma
        estimate = ((A * b_sq + a * a * A * state.gamma) * x_next + a * B_sq * state.estimate) / denominator
        prior = a * a * state.gamma + b_sq
        gamma = B_sq * prior / (A * A * prior + B_sq)
    else:
        kappa = a * a * state.gamma + b_sq  # kappa_{n+1}
        sigma = B_sq + A * A * kappa        # sigma_{n+1}
        estimate = (A * kappa * x_next + a * B_sq * state.estimate) / sigma
        gamma = B_sq * kappa / sigma
    return KalmanState(estimate=estimate, gamma=gamma, step=state.step + 1)


def kalman_filter(params: ModelParams, xs, raw: bool = False) -> FilterRun:
    """
    Fold kalman_init / kalman_step over the observations
    :param params: model parameters
    :param xs: observations x_1..x_n
    :param raw: use the textbook update form (see kalman_step)
    :return: FilterRun with aux = gamma_n
    """
    xs = as_observations(xs)
    estimates = np.empty(len(xs))
    gammas = np.empty(len(xs))
    state = kalman_init(params, xs[0])
    estimates[0], gammas[0] = state.estimate, state.gamma
    for k in range(1, len(xs)):
        state = kalman_step(params, state, xs[k], raw=raw)
        estimates[k], gammas[k] = state.estimate, state.gamma
    LOGGER.debug(f'Kalman filter over {len(xs)} steps ({"raw" if raw else "kappa/sigma"} form), '
                 f'final gamma {gammas[-1]:.6g}')
    return FilterRun(method=Method.KALMAN, estimates=estimates, aux=gammas)
