"""
Parameters of the scalar partially observed system

    s_n = a s_{n-1} + b xi_n,    x_n = A s_n + B eta_n,    s_0 ~ N(0, b^2 / (1 - a^2))

and the scalar recursions shared by every estimator.

Indexing: formulas use 1-based steps, arrays are 0-based, so array slot i holds step i + 1
(kappa[0] is kappa_1). All functions take and return step numbers in the 1-based convention.
"""
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from logger import LOGGER
from errors import DegenerateModel, MalformedInput
from oracle import max_relative_diff

__all__ = ['ModelParams', 'ParamSequences', 'DerivedConstants', 'SteadyState', 'validate', 'param_sequences',
           'gamma_sequence', 'riccati_fixed_point', 'steady_state', 'derived_constants', 'identity_residuals']

PARAM_FIELDS = ('a', 'b', 'A', 'B')


def validate(params: 'ModelParams') -> None:
    """
    Check the constraints under which every recursion is well defined
    :param params: model parameters
    :return: None, raises DegenerateModel naming the violated constraint
    """
    for name in PARAM_FIELDS:
        if not math.isfinite(getattr(params, name)):
            raise DegenerateModel(f'{name} finite')
    if not abs(params.a) < 1:
        raise DegenerateModel('|a|<1')
    if not params.b > 0:
        raise DegenerateModel('b>0')
    if not params.B > 0:
        raise DegenerateModel('B>0')
    if params.A == 0:
        raise DegenerateModel('A!=0')


@dataclass(frozen=True)
class ModelParams:
    a: float
    b: float
    A: float
    B: float

    def __post_init__(self):
        validate(self)

    @property
    def stationary_variance(self) -> float:
        return self.b ** 2 / (1 - self.a ** 2)

    def as_dict(self) -> dict[str, float]:
        return {name: float(getattr(self, name)) for name in PARAM_FIELDS}

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> 'ModelParams':
        """
        Build parameters from a flat {"a", "b", "A", "B"} mapping
        :param values: mapping with the four coefficients
        :return: validated ModelParams
        """
        missing = [name for name in PARAM_FIELDS if name not in values]
        if missing:
            raise MalformedInput(f'missing parameter field(s): {", ".join(missing)}')
        try:
            numbers = {name: float(values[name]) for name in PARAM_FIELDS}
        except (TypeError, ValueError) as e:
            raise MalformedInput(f'parameters must be numbers: {e}')
        not_finite = [name for name, value in numbers.items() if not math.isfinite(value)]
        if not_finite:
            raise MalformedInput(f'non-finite parameter(s): {", ".join(not_finite)}')
        return cls(**numbers)


@dataclass(frozen=True)
class ParamSequences:
    kappa: np.ndarray
    sigma: np.ndarray
    gamma: np.ndarray

    def __len__(self):
        return len(self.kappa)


@dataclass(frozen=True)
class DerivedConstants:
    c1: float
    d0: float
    sigma_tilde_sq: float


@dataclass(frozen=True)
class SteadyState:
    kappa: float
    sigma: float
    gamma: float


def param_sequences(params: ModelParams, n: int) -> ParamSequences:
    """
    Predictive variances kappa_k, observation variances sigma_k and posterior variances gamma_k for k = 1..n
    :param params: model parameters
    :param n: number of steps (>= 1)
    :return: ParamSequences with arrays of length n
    """
    if n < 1:
        raise ValueError(f'n must be >= 1, got {n}')
    a_sq, b_sq, A_sq, B_sq = params.a ** 2, params.b ** 2, params.A ** 2, params.B ** 2
    kappa = np.empty(n)
    sigma = np.empty(n)
    kappa[0] = params.stationary_variance
    sigma[0] = B_sq + A_sq * kappa[0]
    for k in range(1, n):
        kappa[k] = (B_sq * a_sq * kappa[k - 1] + sigma[k - 1] * b_sq) / sigma[k - 1]
        sigma[k] = B_sq + A_sq * kappa[k]
    gamma = B_sq * kappa / sigma
    return ParamSequences(kappa=kappa, sigma=sigma, gamma=gamma)


def gamma_sequence(params: ModelParams, n: int) -> np.ndarray:
    """
    Posterior error variances from the error-variance recursion itself, independent of kappa
    :param params: model parameters
    :param n: number of steps (>= 1)
    :return: gamma_1..gamma_n
    """
    a_sq, b_sq, A_sq, B_sq = params.a ** 2, params.b ** 2, params.A ** 2, params.B ** 2
    s_sq = params.stationary_variance
    gamma = np.empty(n)
    gamma[0] = B_sq * s_sq / (A_sq * s_sq + B_sq)
    for k in range(1, n):
        prior = a_sq * gamma[k - 1] + b_sq
        gamma[k] = B_sq * prior / (A_sq * prior + B_sq)
    return gamma


def riccati_fixed_point(params: ModelParams) -> float:
    """
    Positive root of kappa = B^2 a^2 / A^2 + b^2 - B^4 a^2 / (A^2 (B^2 + A^2 kappa))
    :param params: model parameters
    :return: kappa*, the limit of the kappa_n sequence
    """
    # sigma = B^2 + A^2 kappa solves sigma^2 - p sigma + B^4 a^2 = 0; the larger root is the one with kappa > 0
    B_sq = params.B ** 2
    p = B_sq * (1 + params.a ** 2) + params.A ** 2 * params.b ** 2
    sigma_star = 0.5 * (p + math.sqrt(p * p - 4 * B_sq * B_sq * params.a ** 2))
    return (sigma_star - B_sq) / params.A ** 2


def steady_state(params: ModelParams) -> SteadyState:
    kappa = riccati_fixed_point(params)
    sigma = params.B ** 2 + params.A ** 2 * kappa
    return SteadyState(kappa=kappa, sigma=sigma, gamma=params.B ** 2 * kappa / sigma)


def derived_constants(params: ModelParams) -> DerivedConstants:
    sigma_tilde_sq = params.stationary_variance
    c1 = params.A ** 2 * sigma_tilde_sq
    return DerivedConstants(c1=c1, d0=1 + params.A ** 2 * params.b ** 2 / params.B ** 2,
                            sigma_tilde_sq=sigma_tilde_sq)


def identity_residuals(params: ModelParams, n: int) -> dict[str, float]:
    """
    Max relative residuals of the scalar identities tying the Kalman recursion to kappa and sigma:
    gamma_k = B^2 kappa_k / sigma_k, B^2 + A^2 b^2 + A^2 a^2 gamma_k = sigma_{k+1}, A b^2 + a^2 A gamma_k = A kappa_{k+1}
    :param params: model parameters
    :param n: number of steps (>= 2)
    :return: dict of residual name -> max relative residual over the steps
    """
    seq = param_sequences(params, n)
    gamma = gamma_sequence(params, n)
    a_sq, b_sq, A, B_sq = params.a ** 2, params.b ** 2, params.A, params.B ** 2
    residuals = {
        'gamma_kappa': max_relative_diff(gamma, seq.gamma),
        'kalman_denominator': max_relative_diff(B_sq + A * A * b_sq + A * A * a_sq * gamma[:-1], seq.sigma[1:]),
        'kalman_numerator': max_relative_diff(A * b_sq + a_sq * A * gamma[:-1], A * seq.kappa[1:]),
    }
    LOGGER.debug(f'Scalar identity residuals over {n} steps: {residuals}')
    return residuals
