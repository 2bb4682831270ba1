import time
import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from logger import LOGGER
from model import ModelParams, param_sequences
from kalman import FilterRun, kalman_filter, as_observations
from dobrovidov import GridSpec, grid_bayes_oracle, dobrovidov_recursive, dobrovidov_direct, dobrovidov_score_form, \
    total_log_likelihood
from normalcorr import DEFAULT_OVERFLOW_GUARD, build_covariances, normalcorr_estimate
from oracle import dense_invert, max_abs_diff
from simulate import simulate, empirical_covariance
from report import CompareReport, CovarianceReport
from util import Method

__all__ = ['GridConvergence', 'Benchmark', 'run_method', 'compare_methods', 'grid_convergence',
           'dense_prefix_estimates', 'benchmark', 'covariance_check', 'CONVERGENCE_FLOOR', 'Z_LIMIT']

# Errors below this are roundoff and do not count against monotone convergence
CONVERGENCE_FLOOR = 1e-12
Z_LIMIT = 4.0


@dataclass(frozen=True)
class GridConvergence:
    points: tuple[int, ...]
    errors: tuple[float, ...]  # max |grid - kalman| per grid size

    @property
    def monotone(self) -> bool:
        return all(later <= earlier or later <= CONVERGENCE_FLOOR
                   for earlier, later in zip(self.errors, self.errors[1:]))


@dataclass(frozen=True)
class Benchmark:
    n: int
    structured_seconds: float
    dense_seconds: float
    max_abs_diff: float

    @property
    def speedup(self) -> float:
        return self.dense_seconds / self.structured_seconds if self.structured_seconds > 0 else float('inf')


def run_method(method: Method, params: ModelParams, xs, grid: GridSpec = GridSpec(), raw_kalman: bool = False,
               use_psi: bool = False, overflow_guard: float = DEFAULT_OVERFLOW_GUARD) -> FilterRun:
    """
    Run one estimator over the observations
    :param method: estimator to run
    :param params: model parameters
    :param xs: observations x_1..x_n
    :param grid: grid settings for the grid oracle
    :param raw_kalman: textbook form of the Kalman update
    :param use_psi: psi coefficient path for the normal-correlation estimator
    :param overflow_guard: largest admissible |psi|
    :return: FilterRun
    """
    LOGGER.debug(f'Running {method} on {len(xs)} observations')
    if method == Method.KALMAN:
        return kalman_filter(params, xs, raw=raw_kalman)
    elif method == Method.DOBROVIDOV:
        return dobrovidov_recursive(params, xs)
    elif method == Method.DOBROVIDOV_DIRECT:
        return dobrovidov_direct(params, xs)
    elif method == Method.DOBROVIDOV_SCORE:
        return dobrovidov_score_form(params, xs)
    elif method == Method.NORMALCORR:
        return normalcorr_estimate(params, xs, use_psi=use_psi, overflow_guard=overflow_guard)
    elif method == Method.GRID:
        return grid_bayes_oracle(params, xs, grid)
    raise ValueError(f'Unknown method {method}')


def compare_methods(params: ModelParams, xs, methods: list[Method], tol: float, grid: GridSpec = GridSpec(),
                    raw_kalman: bool = False, use_psi: bool = False, per_step: bool = False,
                    method_params: Optional[dict[Method, ModelParams]] = None,
                    overflow_guard: float = DEFAULT_OVERFLOW_GUARD) -> CompareReport:
    """
    Run every method on the same observations and report the maximum absolute divergence of each pair
    :param params: model parameters
    :param xs: observations x_1..x_n
    :param methods: at least two methods
    :param tol: a pair passes when its divergence is at most tol
    :param grid: grid settings for the grid oracle
    :param raw_kalman: textbook form of the Kalman update
    :param use_psi: psi coefficient path for the normal-correlation estimator
    :param per_step: include every estimate in the report
    :param method_params: parameters that replace params for individual methods
    :param overflow_guard: largest admissible |psi|
    :return: CompareReport
    """
    if len(methods) < 2:
        raise ValueError('compare needs at least two methods')
    xs = as_observations(xs)
    method_params = method_params or {}
    runs = {method: run_method(method, method_params.get(method, params), xs, grid, raw_kalman, use_psi,
                               overflow_guard)
            for method in methods}

    divergence = {}
    for first, second in itertools.combinations(methods, 2):
        divergence[(str(first), str(second))] = max_abs_diff(runs[first].estimates, runs[second].estimates)
        LOGGER.debug(f'{first} vs {second}: max abs divergence {divergence[(str(first), str(second))]:.3g}')

    log_likelihood = None
    if any(m in (Method.DOBROVIDOV, Method.DOBROVIDOV_DIRECT, Method.DOBROVIDOV_SCORE) for m in methods):
        log_likelihood = total_log_likelihood(params, xs)

    table = None
    if per_step:
        table = [{'t': t + 1, **{str(m): float(runs[m].estimates[t]) for m in methods}} for t in range(len(xs))]

    return CompareReport(params=params, methods=[str(m) for m in methods], divergence=divergence, tol=tol,
                         n=len(xs), per_step=table, log_likelihood=log_likelihood)


def grid_convergence(params: ModelParams, xs, points: tuple[int, ...] = (501, 1001, 2001),
                     half_width_sds: float = 8.0) -> GridConvergence:
    """
    Error of the grid oracle against the Kalman filter for increasing grid sizes
    :param params: model parameters
    :param xs: observations x_1..x_n
    :param points: grid sizes, increasing
    :param half_width_sds: grid half width
    :return: GridConvergence
    """
    reference = kalman_filter(params, xs).estimates
    errors = tuple(max_abs_diff(grid_bayes_oracle(params, xs, GridSpec(half_width_sds, p)).estimates, reference)
                   for p in points)
    LOGGER.debug(f'Grid convergence: {dict(zip(points, errors))}')
    return GridConvergence(points=tuple(points), errors=errors)


def dense_prefix_estimates(params: ModelParams, xs) -> FilterRun:
    """
    Normal-correlation estimate for every prefix by dense Gauss-Jordan inversion of the materialized covariance
    :param params: model parameters
    :param xs: observations x_1..x_n
    :return: FilterRun tagged normalcorr, aux = gamma_m
    """
    xs = as_observations(xs)
    estimates = np.empty(len(xs))
    for m in range(1, len(xs) + 1):
        covariance = build_covariances(params, m)
        estimates[m - 1] = covariance.D_sx @ dense_invert(covariance.D_xx).inverse @ xs[:m]
    return FilterRun(method=Method.NORMALCORR, estimates=estimates, aux=param_sequences(params, len(xs)).gamma)


def benchmark(params: ModelParams, n: int, seed: int) -> Benchmark:
    """
    Time all-prefix estimation by the structured coefficients against per-prefix dense solves
    :param params: model parameters
    :param n: trajectory length
    :param seed: simulation seed
    :return: Benchmark
    """
    xs = simulate(params, n, seed).x

    start = time.perf_counter()
    structured = normalcorr_estimate(params, xs)
    structured_seconds = time.perf_counter() - start

    start = time.perf_counter()
    dense = dense_prefix_estimates(params, xs)
    dense_seconds = time.perf_counter() - start

    result = Benchmark(n=n, structured_seconds=structured_seconds, dense_seconds=dense_seconds,
                       max_abs_diff=max_abs_diff(structured.estimates, dense.estimates))
    LOGGER.info(f'n={n}: structured {structured_seconds:.4f}s, dense {dense_seconds:.4f}s '
                f'({result.speedup:.1f}x), max abs diff {result.max_abs_diff:.3g}')
    return result


def covariance_check(params: ModelParams, n: int, trials: int, seed: int, chunk_size: int = 10_000,
                     nr_processes: int = 1) -> CovarianceReport:
    """
    Monte-Carlo covariances of (X_1..X_n) and (S_n, X_m) against their closed forms, as z-scores
    :param params: model parameters
    :param n: trajectory length (<= 16)
    :param trials: number of independent trajectories
    :param seed: master seed
    :param chunk_size: trials per chunk
    :param nr_processes: worker processes
    :return: CovarianceReport
    """
    LOGGER.info(f'Estimating covariances from {trials} trajectories of length {n}...')
    estimate = empirical_covariance(params, n, trials, seed, chunk_size=chunk_size, nr_processes=nr_processes)
    theoretical = build_covariances(params, n)
    z_xx = (estimate.cov_xx - theoretical.D_xx) / estimate.se_xx
    z_sx = (estimate.cov_sx - theoretical.D_sx) / estimate.se_sx
    report = CovarianceReport(params=params, trials=trials, seed=seed, theoretical_xx=theoretical.D_xx,
                              empirical_xx=estimate.cov_xx, z_xx=z_xx, theoretical_sx=theoretical.D_sx,
                              empirical_sx=estimate.cov_sx, z_sx=z_sx, z_limit=Z_LIMIT)
    LOGGER.debug(f'Largest |z| = {report.max_abs_z:.3f}')
    return report
