"""
Brute-force dense linear algebra used to check the structured inverses. Nothing here knows about the
filtering model; matrices are plain 2-D numpy arrays.
"""
from typing import NamedTuple

import numpy as np

from logger import LOGGER
from errors import SingularMatrix, DimensionMismatch

__all__ = ['Inversion', 'as_dense', 'dense_invert', 'mat_mul', 'max_abs_diff', 'max_relative_diff',
           'identity_residual']

PIVOT_TOLERANCE = 1e-300


class Inversion(NamedTuple):
    inverse: np.ndarray
    residual: float  # max |m @ inverse - I|


def as_dense(m) -> np.ndarray:
    """
    Convert to a finite 2-D float array
    :param m: array-like matrix
    :return: 2-D float64 numpy array
    """
    dense = np.array(m, dtype=np.float64, ndmin=2)
    if dense.ndim != 2:
        raise DimensionMismatch(dense.shape, ('rows', 'cols'))
    if not np.all(np.isfinite(dense)):
        raise ValueError('Matrix has non-finite entries')
    return dense


def identity_residual(m: np.ndarray, inverse: np.ndarray) -> float:
    return max_abs_diff(mat_mul(m, inverse), np.eye(len(m)))


def dense_invert(m) -> Inversion:
    """
    Invert a square matrix by Gauss-Jordan elimination with partial pivoting
    :param m: square, nonsingular matrix
    :return: Inversion with the inverse and the residual max |m @ inverse - I|
    """
    m = as_dense(m)
    n, cols = m.shape
    if n != cols:
        raise DimensionMismatch(m.shape, (n, n))

    augmented = np.hstack([m, np.eye(n)])
    for k in range(n):
        # Row interchange with the largest pivot candidate in column k
        p = int(np.argmax(np.abs(augmented[k:, k]))) + k
        if abs(augmented[p, k]) <= PIVOT_TOLERANCE:
            raise SingularMatrix(k, augmented[p, k])
        if p != k:
            augmented[[k, p]] = augmented[[p, k]]

        augmented[k] /= augmented[k, k]
        factors = augmented[:, k].copy()
        factors[k] = 0.0
        augmented -= np.outer(factors, augmented[k])

    inverse = augmented[:, n:]
    residual = identity_residual(m, inverse)
    LOGGER.debug(f'Dense inverse of a {n}x{n} matrix, residual {residual:.3g}')
    return Inversion(inverse=inverse, residual=residual)


def mat_mul(a, b) -> np.ndarray:
    a, b = as_dense(a), as_dense(b)
    if a.shape[1] != b.shape[0]:
        raise DimensionMismatch(a.shape, b.shape)
    return a @ b


def max_abs_diff(a, b) -> float:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(a.shape, b.shape)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b)))


def max_relative_diff(a, b) -> float:
    """
    Max of |a - b| / max(|a|, |b|) elementwise; entries where both are zero count as equal
    """
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(a.shape, b.shape)
    if a.size == 0:
        return 0.0
    scale = np.maximum(np.abs(a), np.abs(b))
    diff = np.abs(a - b)
    nonzero = scale > 0
    if not np.any(nonzero):
        return 0.0
    return float(np.max(diff[nonzero] / scale[nonzero]))
