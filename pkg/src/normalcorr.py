"""
Batch estimation with the normal-correlation formula E(S_n | x) = D_sx D_xx^{-1} x.

D_xx is the Toeplitz matrix c1 a^{|i-j|} shifted by B^2 on the diagonal. Its inverse is assembled in closed form:
the B = 0 part has a tridiagonal inverse, and (I + B^2 (D_xx at B=0)^{-1})^{-1} is the inverse of a symmetric
tridiagonal matrix, written through the three-term psi recurrence

    psi_0 = 1, psi_1 = d0 / a, psi_m = ((d0 + a^2) / a) psi_{m-1} - psi_{m-2}      (interior, m <= N - 1)
    psi~_N = (d0 / a) psi_{N-1} - psi_{N-2}                                         (terminal)

psi grows roughly like ((d0 + a^2) / |a|)^m, so the default coefficient path uses running products of
a B^2 / sigma_j instead and the psi path is guarded against overflow.
"""
import sys
from dataclasses import dataclass, asdict

import numpy as np
from scipy.linalg import toeplitz

from logger import LOGGER
from errors import PsiOverflow, UnsupportedZeroA
from model import ModelParams, ParamSequences, derived_constants, param_sequences
from dobrovidov import direct_weights
from kalman import FilterRun, as_observations
from oracle import max_relative_diff
from util import Method

__all__ = ['StructuredCovariance', 'PsiTable', 'LemmaResiduals', 'DEFAULT_OVERFLOW_GUARD', 'build_covariances',
           'invert_toeplitz_b0', 'psi_table', 'terminal_psi_chain', 'invert_shifted_tridiagonal', 'invert_cov',
           'invert_cov_innovations', 'coefficient_vector', 'normalcorr_estimate', 'lemma_checks']

DEFAULT_OVERFLOW_GUARD = sys.float_info.max / 1e6


@dataclass(frozen=True)
class StructuredCovariance:
    n: int
    c1: float
    a: float
    B_sq: float
    D_xx: np.ndarray  # c1 a^{|i-j|} + B^2 [i = j]
    D_sx: np.ndarray  # (c1 / A) a^{n-j}, j = 1..n

    @property
    def toeplitz_part(self) -> np.ndarray:
        return self.D_xx - self.B_sq * np.eye(self.n)


@dataclass(frozen=True)
class PsiTable:
    psi: np.ndarray  # interior values psi_0..psi_{N-1}
    psi_last: float  # terminal value psi~_N
    d0: float

    @property
    def N(self) -> int:
        return len(self.psi)


@dataclass(frozen=True)
class LemmaResiduals:
    N: int
    psi_closed_form: float
    psi_chain: float
    numerator_first: float
    numerator_middle: float
    numerator_last: float
    cx1: float
    cx2: float
    cx3: float

    @property
    def max_residual(self) -> float:
        return max(value for name, value in asdict(self).items() if name != 'N')

    def as_dict(self) -> dict[str, float]:
        return {name: value for name, value in asdict(self).items() if name != 'N'}


def build_covariances(params: ModelParams, n: int) -> StructuredCovariance:
    """
    Covariance of (X_1..X_n) and of S_n with (X_1..X_n) under the stationary law
    :param params: model parameters
    :param n: dimension (>= 1)
    :return: StructuredCovariance
    """
    if n < 1:
        raise ValueError(f'n must be >= 1, got {n}')
    c1 = derived_constants(params).c1
    powers = params.a ** np.arange(n)
    B_sq = params.B ** 2
    return StructuredCovariance(n=n, c1=c1, a=params.a, B_sq=B_sq, D_xx=toeplitz(c1 * powers) + B_sq * np.eye(n),
                                D_sx=c1 / params.A * powers[::-1])


def invert_toeplitz_b0(params: ModelParams, n: int) -> np.ndarray:
    """
    Closed-form inverse of c1 a^{|i-j|}: tridiagonal, (1 / (c1 (1 - a^2))) times
    corners 1, interior diagonal 1 + a^2, off-diagonals -a
    :param params: model parameters
    :param n: dimension
    :return: n x n inverse
    """
    c1 = derived_constants(params).c1
    if n == 1:
        return np.array([[1 / c1]])
    a = params.a
    main = np.full(n, 1 + a * a)
    main[[0, -1]] = 1.0
    off = np.full(n - 1, -a)
    return (np.diag(main) + np.diag(off, 1) + np.diag(off, -1)) / (c1 * (1 - a * a))


def _interior_psi(params: ModelParams, count: int, overflow_guard: float) -> tuple[np.ndarray, float]:
    # psi_0..psi_{count-1} by the interior recurrence; d0 returned alongside
    if params.a == 0:
        raise UnsupportedZeroA('psi recurrence')
    d0 = derived_constants(params).d0
    a = params.a
    ratio = (d0 + a * a) / a
    psi = np.empty(count)
    psi[0] = 1.0
    if count > 1:
        psi[1] = d0 / a
    for m in range(2, count):
        psi[m] = ratio * psi[m - 1] - psi[m - 2]
        if not abs(psi[m]) <= overflow_guard:
            raise PsiOverflow(m, psi[m])
    if count > 1 and not abs(psi[1]) <= overflow_guard:
        raise PsiOverflow(1, psi[1])
    return psi, d0


def _terminal(params: ModelParams, psi: np.ndarray, d0: float, N: int, overflow_guard: float) -> float:
    psi_last = d0 / params.a * psi[N - 1] - psi[N - 2]
    if not abs(psi_last) <= overflow_guard:
        raise PsiOverflow(N, psi_last)
    return psi_last


def psi_table(params: ModelParams, N: int, overflow_guard: float = DEFAULT_OVERFLOW_GUARD) -> PsiTable:
    """
    Interior values psi_0..psi_{N-1} and the terminal value psi~_N
    :param params: model parameters (a != 0)
    :param N: matrix dimension (>= 2)
    :param overflow_guard: largest admissible |psi|
    :return: PsiTable
    """
    if N < 2:
        raise ValueError(f'N must be >= 2, got {N}')
    psi, d0 = _interior_psi(params, N, overflow_guard)
    psi_last = _terminal(params, psi, d0, N, overflow_guard)
    LOGGER.debug(f'psi table for N={N}: |psi~_N| = {abs(psi_last):.3g}')
    return PsiTable(psi=psi, psi_last=psi_last, d0=d0)


def terminal_psi_chain(params: ModelParams, N: int, overflow_guard: float = DEFAULT_OVERFLOW_GUARD) -> np.ndarray:
    """
    psi~_2..psi~_N from the three-term relation psi~_{M+1} = (d0 / a + a) psi~_M - psi~_{M-1},
    seeded with psi~_2 and psi~_3 from the recurrences
    :param params: model parameters (a != 0)
    :param N: last index (>= 2)
    :return: array whose slot i holds psi~_{i+2}
    """
    if N < 2:
        raise ValueError(f'N must be >= 2, got {N}')
    psi, d0 = _interior_psi(params, max(N, 3), overflow_guard)
    chain = np.empty(N - 1)
    chain[0] = _terminal(params, psi, d0, 2, overflow_guard)
    if N >= 3:
        chain[1] = _terminal(params, psi, d0, 3, overflow_guard)
    factor = d0 / params.a + params.a
    for i in range(2, N - 1):
        chain[i] = factor * chain[i - 1] - chain[i - 2]
        if not abs(chain[i]) <= overflow_guard:
            raise PsiOverflow(i + 2, chain[i])
    return chain


def invert_shifted_tridiagonal(params: ModelParams, n: int,
                               overflow_guard: float = DEFAULT_OVERFLOW_GUARD) -> np.ndarray:
    """
    Inverse of I + B^2 (D_xx at B=0)^{-1}: entries ((d0 - 1) / (a psi~_n)) psi_{min(i,j)-1} psi_{n-max(i,j)}
    :param params: model parameters (a != 0)
    :param n: dimension (>= 2)
    :return: n x n symmetric matrix
    """
    if params.a == 0:
        raise UnsupportedZeroA('invert_shifted_tridiagonal')
    table = psi_table(params, n, overflow_guard)
    index = np.arange(n)
    low = np.minimum.outer(index, index)
    high = np.maximum.outer(index, index)
    # d0 - 1 formed as A^2 b^2 / B^2, subtracting 1 from d0 loses digits when A^2 b^2 << B^2
    signal_to_noise = params.A ** 2 * params.b ** 2 / params.B ** 2
    return signal_to_noise / (params.a * table.psi_last) * table.psi[low] * table.psi[n - 1 - high]


def invert_cov(params: ModelParams, n: int, overflow_guard: float = DEFAULT_OVERFLOW_GUARD) -> np.ndarray:
    """
    D_xx^{-1} = P^{-1} - B^2 P^{-1} M P^{-1} with M = (I + B^2 P^{-1})^{-1} and P = D_xx at B=0.
    Since I - B^2 M P^{-1} = M this is assembled as P^{-1} M, which avoids subtracting two terms of
    order 1 / (A^2 b^2).
    :param params: model parameters
    :param n: dimension (>= 1)
    :param overflow_guard: largest admissible |psi|
    :return: n x n inverse covariance
    """
    if n == 1 or params.a == 0:
        # D_xx is diagonal
        return np.eye(n) / (derived_constants(params).c1 + params.B ** 2)
    p_inv = invert_toeplitz_b0(params, n)
    shifted_inv = invert_shifted_tridiagonal(params, n, overflow_guard)
    return p_inv @ shifted_inv


def invert_cov_innovations(params: ModelParams, n: int) -> np.ndarray:
    """
    D_xx^{-1} = L^T diag(1 / sigma) L from the innovations x_k - A L_{k-1}, whose coefficients are
    A a times the filter weights of the prefix k - 1. Free of psi, so usable past the overflow guard.
    :param params: model parameters
    :param n: dimension (>= 1)
    :return: n x n inverse covariance
    """
    seq = param_sequences(params, n)
    innovations = np.eye(n)
    for k in range(1, n):
        innovations[k, :k] = -params.A * params.a * direct_weights(params, k, seq.kappa, seq.sigma)
    return innovations.T @ (innovations / seq.sigma[:, np.newaxis])


def _psi_coefficients(params: ModelParams, n: int, overflow_guard: float) -> np.ndarray:
    table = psi_table(params, n, overflow_guard)
    a, A = params.a, params.A
    scale = A * params.b ** 2 / (params.B ** 2 * a * table.psi_last)
    # x_k gets psi_{k-1}; for k = 1 this equals (a psi_1 - 1) / (A a psi~_n)
    return scale * table.psi


def coefficient_vector(params: ModelParams, n: int, use_psi: bool = False,
                       overflow_guard: float = DEFAULT_OVERFLOW_GUARD, seq: ParamSequences = None) -> np.ndarray:
    """
    Coefficients v with E(S_n | x_1..x_n) = v . x, i.e. D_sx D_xx^{-1}
    :param params: model parameters
    :param n: prefix length (>= 1)
    :param use_psi: evaluate through the psi recurrence (falls back to the stable path on overflow or a = 0)
    :param overflow_guard: largest admissible |psi|
    :param seq: optional precomputed sequences of length >= n
    :return: length-n coefficient vector
    """
    if use_psi and n >= 2 and params.a != 0:
        try:
            return _psi_coefficients(params, n, overflow_guard)
        except PsiOverflow as e:
            LOGGER.warning(f'{e}; falling back to the product-of-ratios coefficients')
    if seq is None:
        seq = param_sequences(params, n)
    return direct_weights(params, n, seq.kappa, seq.sigma)


def normalcorr_estimate(params: ModelParams, xs, use_psi: bool = False,
                        overflow_guard: float = DEFAULT_OVERFLOW_GUARD) -> FilterRun:
    """
    Normal-correlation estimate for every prefix of the observations
    :param params: model parameters
    :param xs: observations x_1..x_n
    :param use_psi: use the psi coefficient path
    :param overflow_guard: largest admissible |psi|
    :return: FilterRun with aux = gamma_m = B^2 kappa_m / sigma_m
    """
    xs = as_observations(xs)
    seq = param_sequences(params, len(xs))
    estimates = np.array([coefficient_vector(params, m, use_psi, overflow_guard, seq) @ xs[:m]
                          for m in range(1, len(xs) + 1)])
    return FilterRun(method=Method.NORMALCORR, estimates=estimates, aux=seq.gamma)


def lemma_checks(params: ModelParams, N: int, overflow_guard: float = DEFAULT_OVERFLOW_GUARD) -> LemmaResiduals:
    """
    Relative residuals, maximized over M = 2..N, of
      * the closed form psi~_M = (1 - a^2) prod_{i<=M} sigma_i / (B^{2M} a^M)
      * the three-term chain of terminal values
      * the numerator identities of the normal-correlation coefficients
        (a psi_1 - 1) / (A a) = A b^2 / (B^2 a),
        (a psi_{k-2} - (1 + a^2) psi_{k-1} + a psi_k) / (A a) = (A b^2 / (B^2 a)) psi_{k-1}, 2 <= k <= M-1,
        (a psi_{M-2} - psi_{M-1} + a psi~_M) / (A a) = (A b^2 / (B^2 a)) psi_{M-1}
      * the same numerators against C_{x_k} (1 - a^2) / (B^{2M} a^M), C_{x_k} = A a^{M-k} B^{2(M-k)} kappa_k prod_{j<k} sigma_j
    :param params: model parameters (a != 0)
    :param N: largest dimension (>= 2)
    :param overflow_guard: largest admissible |psi|
    :return: LemmaResiduals
    """
    if N < 2:
        raise ValueError(f'N must be >= 2, got {N}')
    psi, d0 = _interior_psi(params, N, overflow_guard)
    seq = param_sequences(params, N)
    a, A, b_sq, B_sq = params.a, params.A, params.b ** 2, params.B ** 2
    numerator_scale = A * b_sq / (B_sq * a)
    # ratio_products[k] = prod_{j<=k+1} sigma_j / (B^2 a)
    ratio_products = np.cumprod(seq.sigma / (B_sq * a))
    # normalized C_{x_k}: A kappa_k (1 - a^2) / (B^2 a) * prod_{j<k} sigma_j / (B^2 a)
    c_normalized = A * seq.kappa * (1 - a * a) / (B_sq * a) * np.concatenate([[1.0], ratio_products[:-1]])

    terminal = np.array([_terminal(params, psi, d0, M, overflow_guard) for M in range(2, N + 1)])
    closed_form = (1 - a * a) * ratio_products[1:]
    chain = terminal_psi_chain(params, N, overflow_guard)

    first = (a * psi[1] - 1) / (A * a)
    middle_lhs, middle_rhs, middle_c = [], [], []
    last_lhs, last_rhs, last_c = [], [], []
    for M in range(2, N + 1):
        for k in range(2, M):
            middle_lhs.append((a * psi[k - 2] - (1 + a * a) * psi[k - 1] + a * psi[k]) / (A * a))
            middle_rhs.append(numerator_scale * psi[k - 1])
            middle_c.append(c_normalized[k - 1])
        last_lhs.append((a * psi[M - 2] - psi[M - 1] + a * terminal[M - 2]) / (A * a))
        last_rhs.append(numerator_scale * psi[M - 1])
        last_c.append(c_normalized[M - 1])

    residuals = LemmaResiduals(
        N=N,
        psi_closed_form=max_relative_diff(terminal, closed_form),
        psi_chain=max_relative_diff(chain, terminal),
        numerator_first=max_relative_diff(first, numerator_scale),
        numerator_middle=max_relative_diff(middle_lhs, middle_rhs),
        numerator_last=max_relative_diff(last_lhs, last_rhs),
        cx1=max_relative_diff(first, c_normalized[0]),
        cx2=max_relative_diff(middle_lhs, middle_c),
        cx3=max_relative_diff(last_lhs, last_c),
    )
    LOGGER.debug(f'Lemma residuals up to N={N}: max {residuals.max_residual:.3g}')
    return residuals
