import math
import multiprocessing
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import signal

from logger import LOGGER
from model import ModelParams

__all__ = ['Trajectory', 'NoiseStreams', 'CovarianceEstimate', 'simulate_with_noise', 'simulate',
           'empirical_covariance', 'MAX_COVARIANCE_DIM', 'MIN_TRIALS']

MAX_COVARIANCE_DIM = 16
MIN_TRIALS = 10_000


@dataclass(frozen=True)
class Trajectory:
    x: np.ndarray
    s: Optional[np.ndarray] = None  # None for observations-only data
    s0: Optional[float] = None

    def __post_init__(self):
        if len(self.x) < 1:
            raise ValueError('Trajectory needs at least one observation')
        if self.s is not None and len(self.s) != len(self.x):
            raise ValueError(f'Hidden states ({len(self.s)}) and observations ({len(self.x)}) differ in length')
        if not np.all(np.isfinite(self.x)) or (self.s is not None and not np.all(np.isfinite(self.s))):
            raise ValueError('Trajectory has non-finite entries')

    def __len__(self):
        return len(self.x)

    def summary(self) -> dict[str, float]:
        ddof = 1 if len(self) > 1 else 0
        stats = {'n': len(self), 'mean_x': float(np.mean(self.x)), 'var_x': float(np.var(self.x, ddof=ddof))}
        if self.s is not None:
            stats.update({'mean_s': float(np.mean(self.s)), 'var_s': float(np.var(self.s, ddof=ddof))})
        return stats


@dataclass(frozen=True)
class NoiseStreams:
    xi: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        if len(self.xi) != len(self.eta):
            raise ValueError(f'Noise streams differ in length ({len(self.xi)} vs {len(self.eta)})')


@dataclass(frozen=True)
class CovarianceEstimate:
    cov_xx: np.ndarray  # n x n sample covariance of X_1..X_n
    cov_sx: np.ndarray  # cov(S_n, X_m) for m = 1..n
    se_xx: np.ndarray
    se_sx: np.ndarray
    trials: int


def _propagate(params: ModelParams, s0: np.ndarray, xi: np.ndarray, eta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # s_k = a s_{k-1} + b xi_k along the last axis, started from s_0
    s = signal.lfilter([params.b], [1.0, -params.a], xi, axis=-1, zi=params.a * s0[..., np.newaxis])[0]
    return s, params.A * s + params.B * eta


def simulate_with_noise(params: ModelParams, s0: float, noise: NoiseStreams) -> Trajectory:
    """
    Run the system forward with given noise draws
    :param params: model parameters
    :param s0: initial state s_0
    :param noise: standard-normal draws xi_1..xi_n, eta_1..eta_n
    :return: Trajectory with s_1..s_n and x_1..x_n
    """
    xi = np.asarray(noise.xi, dtype=np.float64)
    eta = np.asarray(noise.eta, dtype=np.float64)
    s, x = _propagate(params, np.asarray(s0, dtype=np.float64), xi, eta)
    return Trajectory(x=x, s=s, s0=float(s0))


def simulate(params: ModelParams, n: int, seed: int) -> Trajectory:
    """
    Simulate n steps started from the stationary law s_0 ~ N(0, b^2 / (1 - a^2))
    :param params: model parameters
    :param n: number of steps (>= 1)
    :param seed: seed of the generator; the same seed gives a bit-identical trajectory
    :return: Trajectory
    """
    if n < 1:
        raise ValueError(f'n must be >= 1, got {n}')
    rng = np.random.default_rng(seed)
    s0 = rng.normal(0.0, math.sqrt(params.stationary_variance))
    noise = NoiseStreams(xi=rng.standard_normal(n), eta=rng.standard_normal(n))
    LOGGER.debug(f'Simulated {n} steps with seed {seed}, s0 = {s0:.6g}')
    return simulate_with_noise(params, s0, noise)


def _chunk_statistics(job: tuple[ModelParams, int, int, int, int]) -> tuple[np.ndarray, np.ndarray]:
    """
    Sums of z and z z^T over one chunk of independent trajectories, z = (X_1..X_n, S_n)
    :param job: (params, n, chunk size, master seed, chunk index)
    """
    params, n, size, seed, index = job
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))
    s0 = rng.normal(0.0, math.sqrt(params.stationary_variance), size=size)
    xi = rng.standard_normal((size, n))
    eta = rng.standard_normal((size, n))
    s, x = _propagate(params, s0, xi, eta)
    z = np.hstack([x, s[:, -1:]])
    return z.sum(axis=0), z.T @ z


def empirical_covariance(params: ModelParams, n: int, trials: int, seed: int, chunk_size: int = 10_000,
                         nr_processes: int = 1) -> CovarianceEstimate:
    """
    Monte-Carlo covariance of (X_1..X_n) and of (S_n, X_m) over independent stationary trajectories.
    Trials are split into fixed chunks, chunk c drawing from the substream (seed, c), and chunk sums are
    reduced in chunk order, so the result does not depend on nr_processes.
    :param params: model parameters
    :param n: trajectory length (<= 16)
    :param trials: number of independent trajectories (>= 10^4)
    :param seed: master seed
    :param chunk_size: trials per chunk
    :param nr_processes: worker processes
    :return: CovarianceEstimate
    """
    if not 1 <= n <= MAX_COVARIANCE_DIM:
        raise ValueError(f'n must be in 1..{MAX_COVARIANCE_DIM}, got {n}')
    if trials < MIN_TRIALS:
        raise ValueError(f'trials must be >= {MIN_TRIALS}, got {trials}')

    sizes = [chunk_size] * (trials // chunk_size) + ([trials % chunk_size] if trials % chunk_size else [])
    jobs = [(params, n, size, seed, index) for index, size in enumerate(sizes)]
    LOGGER.debug(f'Monte-Carlo covariance: {trials} trials in {len(jobs)} chunks on {nr_processes} process(es)')

    if nr_processes > 1 and len(jobs) > 1:
        with multiprocessing.Pool(min(nr_processes, len(jobs))) as pool:
            results = pool.map(_chunk_statistics, jobs)  # map keeps chunk order
    else:
        results = [_chunk_statistics(job) for job in jobs]

    total = np.zeros(n + 1)
    products = np.zeros((n + 1, n + 1))
    for chunk_sum, chunk_products in results:
        total += chunk_sum
        products += chunk_products

    mean = total / trials
    cov = (products - trials * np.outer(mean, mean)) / (trials - 1)
    variances = np.diag(cov)
    # Normal-theory standard error of a sample covariance
    se = np.sqrt((np.outer(variances, variances) + cov ** 2) / trials)
    return CovarianceEstimate(cov_xx=cov[:n, :n], cov_sx=cov[n, :n], se_xx=se[:n, :n], se_sx=se[n, :n],
                              trials=trials)
