"""
Optimal filtering through the one-step predictive density of the observations.

For the linear-Gaussian system the predictive density f(x_k | x_1..x_{k-1}) is N(A L_{k-1}, sigma_k), with the
accumulator L_k = (A a / sigma_k) (x_k kappa_k + L_{k-1} B^2 / A), L_0 = 0. Step 1 uses the stationary marginal
N(0, sigma_1). The filtering equation

    E(S_k | x_1..x_k) = (B^2 / A) * d/dx_k log f(x_k | x_1..x_{k-1}) + x_k / A

needs only observable quantities; it is evaluated here in score form, as an explicit weighted sum and as a
two-term recursion. A brute-force grid integration of the posterior recursion serves as an independent check.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.integrate import trapezoid

from logger import LOGGER
from errors import StepOutOfRange, GridTooCoarse
from model import ModelParams, param_sequences
from kalman import FilterRun, as_observations
from util import Method

__all__ = ['PredictiveParams', 'PredictiveSequence', 'GridSpec', 'predictive_sequence', 'log_predictive_density',
           'score_ratio', 'score_ratios', 'total_log_likelihood', 'dobrovidov_score_form', 'dobrovidov_recursive',
           'direct_weights', 'dobrovidov_direct', 'grid_bayes_oracle']

MIN_GRID_POINTS = 501
MIN_HALF_WIDTH_SDS = 6.0
BOUNDARY_MASS_LIMIT = 1e-10


@dataclass(frozen=True)
class PredictiveParams:
    mean: float      # A L_{k-1}
    variance: float  # sigma_k
    ell: float       # L_{k-1}


@dataclass(frozen=True)
class PredictiveSequence:
    mean: np.ndarray
    variance: np.ndarray
    ell: np.ndarray
    kappa: np.ndarray

    def __len__(self):
        return len(self.mean)

    def __getitem__(self, index: int) -> PredictiveParams:
        return PredictiveParams(mean=float(self.mean[index]), variance=float(self.variance[index]),
                                ell=float(self.ell[index]))


@dataclass(frozen=True)
class GridSpec:
    half_width_sds: float = 8.0
    points: int = 2001


def predictive_sequence(params: ModelParams, xs) -> PredictiveSequence:
    """
    Mean and variance of f(x_k | x_1..x_{k-1}) for every k; slot 0 is the marginal N(0, sigma_1) of X_1
    :param params: model parameters
    :param xs: observations x_1..x_n
    :return: PredictiveSequence
    """
    xs = as_observations(xs)
    seq = param_sequences(params, len(xs))
    a, A, B_sq = params.a, params.A, params.B ** 2
    ell = np.zeros(len(xs))  # ell[k] = L_k for the prediction of step k + 1, ell[0] = L_0 = 0
    for k in range(1, len(xs)):
        ell[k] = (A * a / seq.sigma[k - 1]) * (xs[k - 1] * seq.kappa[k - 1] + ell[k - 1] * B_sq / A)
    return PredictiveSequence(mean=A * ell, variance=seq.sigma, ell=ell, kappa=seq.kappa)


def _check_step(k: int, n: int) -> None:
    if not 1 <= k <= n:
        raise StepOutOfRange(k, n)


def log_predictive_density(params: ModelParams, xs, k: int) -> float:
    """
    log f(x_k | x_1..x_{k-1}) at the observed x_k
    :param params: model parameters
    :param xs: observations x_1..x_n
    :param k: step, 1 <= k <= n
    :return: log density
    """
    xs = as_observations(xs)
    _check_step(k, len(xs))
    predictive = predictive_sequence(params, xs[:k])[k - 1]
    return float(stats.norm.logpdf(xs[k - 1], loc=predictive.mean, scale=math.sqrt(predictive.variance)))


def score_ratio(params: ModelParams, xs, k: int) -> float:
    """
    Logarithmic derivative f'/f of the predictive density in x_k, at the observed x_k
    :param params: model parameters
    :param xs: observations x_1..x_n
    :param k: step, 1 <= k <= n
    :return: (A L_{k-1} - x_k) / sigma_k
    """
    xs = as_observations(xs)
    _check_step(k, len(xs))
    predictive = predictive_sequence(params, xs[:k])[k - 1]
    return (predictive.mean - xs[k - 1]) / predictive.variance


def score_ratios(params: ModelParams, xs) -> np.ndarray:
    xs = as_observations(xs)
    predictive = predictive_sequence(params, xs)
    return (predictive.mean - xs) / predictive.variance


def total_log_likelihood(params: ModelParams, xs) -> float:
    xs = as_observations(xs)
    predictive = predictive_sequence(params, xs)
    return float(np.sum(stats.norm.logpdf(xs, loc=predictive.mean, scale=np.sqrt(predictive.variance))))


def dobrovidov_score_form(params: ModelParams, xs) -> FilterRun:
    """
    The filtering equation evaluated literally: (B^2 / A) * score + x_k / A at every step
    :param params: model parameters
    :param xs: observations x_1..x_n
    :return: FilterRun with aux = sigma_k
    """
    xs = as_observations(xs)
    predictive = predictive_sequence(params, xs)
    score = (predictive.mean - xs) / predictive.variance
    estimates = params.B ** 2 / params.A * score + xs / params.A
    return FilterRun(method=Method.DOBROVIDOV_SCORE, estimates=estimates, aux=predictive.variance.copy())


def dobrovidov_recursive(params: ModelParams, xs) -> FilterRun:
    """
    E(S_{n+1} | .) = A x_{n+1} kappa_{n+1} / sigma_{n+1} + (B^2 a / sigma_{n+1}) E(S_n | .),
    started from E(S_1 | x_1) = A kappa_1 x_1 / sigma_1
    :param params: model parameters
    :param xs: observations x_1..x_n
    :return: FilterRun with aux = sigma_n
    """
    xs = as_observations(xs)
    seq = param_sequences(params, len(xs))
    A, aB_sq = params.A, params.a * params.B ** 2
    estimates = np.empty(len(xs))
    estimates[0] = A * seq.kappa[0] * xs[0] / seq.sigma[0]
    for k in range(1, len(xs)):
        estimates[k] = A * xs[k] * seq.kappa[k] / seq.sigma[k] + aB_sq / seq.sigma[k] * estimates[k - 1]
    return FilterRun(method=Method.DOBROVIDOV, estimates=estimates, aux=seq.sigma)


def direct_weights(params: ModelParams, n: int, kappa: np.ndarray = None, sigma: np.ndarray = None) -> np.ndarray:
    """
    Weights of x_1..x_n in E(S_n | x_1..x_n): (A kappa_i / sigma_i) * prod_{j=i+1..n} (a B^2 / sigma_j),
    built from running products of the ratios a B^2 / sigma_j, each below |a| in magnitude
    :param params: model parameters
    :param n: prefix length (>= 1)
    :param kappa: optional precomputed kappa_1..kappa_m, m >= n
    :param sigma: optional precomputed sigma_1..sigma_m, m >= n
    :return: weight vector of length n
    """
    if kappa is None or sigma is None:
        seq = param_sequences(params, n)
        kappa, sigma = seq.kappa, seq.sigma
    kappa, sigma = kappa[:n], sigma[:n]
    ratios = params.a * params.B ** 2 / sigma
    tail = np.ones(n)
    if n > 1:
        tail[:-1] = np.cumprod(ratios[:0:-1])[::-1]
    return params.A * kappa / sigma * tail


def dobrovidov_direct(params: ModelParams, xs) -> FilterRun:
    """
    Each estimate as the explicit linear combination of all observations so far
    :param params: model parameters
    :param xs: observations x_1..x_n
    :return: FilterRun with aux = sigma_n
    """
    xs = as_observations(xs)
    seq = param_sequences(params, len(xs))
    estimates = np.array([direct_weights(params, m, seq.kappa, seq.sigma) @ xs[:m] for m in range(1, len(xs) + 1)])
    return FilterRun(method=Method.DOBROVIDOV_DIRECT, estimates=estimates, aux=seq.sigma)


def grid_bayes_oracle(params: ModelParams, xs, grid: GridSpec = GridSpec()) -> FilterRun:
    """
    Posterior means by numerical integration of the posterior recursion
        w_k(s) ∝ f(x_k | s) * integral p(s | s') w_{k-1}(s') ds'
    on a fixed grid with trapezoid quadrature, started from the stationary law of S_1
    :param params: model parameters
    :param xs: observations x_1..x_n
    :param grid: grid half width in standard deviations of sqrt(sigma_tilde^2 + b^2), and number of points
    :return: FilterRun with aux = posterior variance on the grid
    """
    xs = as_observations(xs)
    if grid.points < MIN_GRID_POINTS or grid.points % 2 == 0:
        raise ValueError(f'grid points must be odd and >= {MIN_GRID_POINTS}, got {grid.points}')
    if grid.half_width_sds < MIN_HALF_WIDTH_SDS:
        raise ValueError(f'grid half width must be >= {MIN_HALF_WIDTH_SDS} sds, got {grid.half_width_sds}')

    half_width = grid.half_width_sds * math.sqrt(params.stationary_variance + params.b ** 2)
    s = np.linspace(-half_width, half_width, grid.points)
    spacing = s[1] - s[0]
    quadrature = np.full(grid.points, spacing)
    quadrature[[0, -1]] = spacing / 2
    LOGGER.debug(f'Grid oracle: {grid.points} points on +-{half_width:.4g} (spacing {spacing:.3g})')

    # transition[i, j] = p(s_i | s_j) times the trapezoid weight of s_j
    transition = stats.norm.pdf(s[:, np.newaxis], loc=params.a * s[np.newaxis, :], scale=params.b) * quadrature
    predicted = stats.norm.pdf(s, scale=math.sqrt(params.stationary_variance))

    estimates = np.empty(len(xs))
    variances = np.empty(len(xs))
    for k, x in enumerate(xs):
        if k > 0:
            predicted = transition @ posterior
        log_likelihood = stats.norm.logpdf(x, loc=params.A * s, scale=params.B)
        unnormalized = np.exp(log_likelihood - log_likelihood.max()) * predicted
        mass = trapezoid(unnormalized, s)
        if not mass > 0:
            raise GridTooCoarse(k + 1, float('nan'))
        posterior = unnormalized / mass
        boundary_mass = (posterior[0] + posterior[-1]) * spacing
        if boundary_mass > BOUNDARY_MASS_LIMIT:
            raise GridTooCoarse(k + 1, boundary_mass)
        estimates[k] = trapezoid(s * posterior, s)
        variances[k] = trapezoid((s - estimates[k]) ** 2 * posterior, s)
    return FilterRun(method=Method.GRID, estimates=estimates, aux=variances)
