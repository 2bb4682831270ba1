import json
import hashlib
from pathlib import Path
from typing import Any, Optional

import numpy as np

from logger import LOGGER
from model import ModelParams

__all__ = ['REPORT_VERSION', 'Report', 'CompareReport', 'InversionReport', 'LemmaReport', 'CovarianceReport']

REPORT_VERSION = 1


def _plain(value: Any) -> Any:
    # numpy scalars and arrays to JSON-native values
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


class Report:
    """
    Machine-readable result of a subcommand. The key is the MD5 digest of the report body, so equal
    inputs give equal keys and file names.
    """
    kind: str = 'report'

    def __init__(self, params: ModelParams):
        self.params = params

    @property
    def passed(self) -> bool:
        return True

    def body(self) -> dict[str, Any]:
        raise NotImplementedError

    @property
    def checksum(self) -> str:
        return hashlib.md5(json.dumps(self._full_body(), sort_keys=True).encode()).hexdigest()

    def _full_body(self) -> dict[str, Any]:
        return _plain({'kind': self.kind, 'params': self.params.as_dict(), **self.body(), 'pass': self.passed})

    def as_dict(self) -> dict[str, Any]:
        return {'version': REPORT_VERSION, **self._full_body(), 'key': self.checksum}

    def __str__(self):
        return json.dumps(self.as_dict(), indent=4)

    @property
    def filename(self) -> str:
        return self.checksum[:16] + '.json'

    def write_to_file(self, filename: Path):
        """
        Save report as a JSON file to disk
        :param filename: save location
        :return: None
        """
        with open(filename, 'w') as file:
            json.dump(self.as_dict(), file, indent=4)
        LOGGER.info(f'Wrote {self.kind} report to "{filename}"')


class CompareReport(Report):
    kind = 'compare'

    def __init__(self, params: ModelParams, methods: list[str], divergence: dict[tuple[str, str], float], tol: float,
                 n: int, per_step: Optional[list[dict[str, float]]] = None, log_likelihood: Optional[float] = None):
        super().__init__(params)
        self.methods = methods
        self.divergence = divergence
        self.tol = tol
        self.n = n
        self.per_step = per_step
        self.log_likelihood = log_likelihood

    @property
    def passed(self) -> bool:
        return all(value <= self.tol for value in self.divergence.values())

    def max_divergence(self, first: str, second: str) -> float:
        """
        Max absolute divergence between two methods, in either order
        """
        if (first, second) in self.divergence:
            return self.divergence[(first, second)]
        return self.divergence[(second, first)]

    def body(self) -> dict[str, Any]:
        body = {
            'n': self.n,
            'methods': self.methods,
            'tol': self.tol,
            'max_abs_divergence': [{'methods': list(pair), 'value': value} for pair, value in self.divergence.items()],
        }
        if self.log_likelihood is not None:
            body['log_likelihood'] = self.log_likelihood
        if self.per_step is not None:
            body['per_step'] = self.per_step
        return body


class InversionReport(Report):
    kind = 'invert'

    def __init__(self, params: ModelParams, covariance: np.ndarray, inverse: np.ndarray, residual: float, path: str,
                 oracle_residual: Optional[float] = None, oracle_max_abs_diff: Optional[float] = None):
        super().__init__(params)
        self.covariance = covariance
        self.inverse = inverse
        self.residual = residual
        self.path = path
        self.oracle_residual = oracle_residual
        self.oracle_max_abs_diff = oracle_max_abs_diff

    def body(self) -> dict[str, Any]:
        body = {
            'n': len(self.covariance),
            'path': self.path,
            'D_xx': self.covariance,
            'inverse': self.inverse,
            'residual': self.residual,
        }
        if self.oracle_residual is not None:
            body['oracle'] = {'residual': self.oracle_residual, 'max_abs_diff': self.oracle_max_abs_diff}
        return body


class LemmaReport(Report):
    kind = 'lemmas'

    def __init__(self, params: ModelParams, N: int, residuals: dict[str, float], tol: float):
        super().__init__(params)
        self.N = N
        self.residuals = residuals
        self.tol = tol

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tol

    def body(self) -> dict[str, Any]:
        return {'N': self.N, 'tol': self.tol, 'residuals': self.residuals, 'max_residual': self.max_residual}


class CovarianceReport(Report):
    kind = 'montecarlo'

    def __init__(self, params: ModelParams, trials: int, seed: int, theoretical_xx: np.ndarray,
                 empirical_xx: np.ndarray, z_xx: np.ndarray, theoretical_sx: np.ndarray, empirical_sx: np.ndarray,
                 z_sx: np.ndarray, z_limit: float):
        super().__init__(params)
        self.trials = trials
        self.seed = seed
        self.theoretical_xx = theoretical_xx
        self.empirical_xx = empirical_xx
        self.z_xx = z_xx
        self.theoretical_sx = theoretical_sx
        self.empirical_sx = empirical_sx
        self.z_sx = z_sx
        self.z_limit = z_limit

    @property
    def max_abs_z(self) -> float:
        return float(max(np.max(np.abs(self.z_xx)), np.max(np.abs(self.z_sx))))

    @property
    def passed(self) -> bool:
        return self.max_abs_z <= self.z_limit

    def body(self) -> dict[str, Any]:
        return {
            'n': len(self.theoretical_xx),
            'trials': self.trials,
            'seed': self.seed,
            'cov_xx': {'theoretical': self.theoretical_xx, 'empirical': self.empirical_xx, 'z': self.z_xx},
            'cov_sx': {'theoretical': self.theoretical_sx, 'empirical': self.empirical_sx, 'z': self.z_sx},
            'max_abs_z': self.max_abs_z,
            'z_limit': self.z_limit,
        }
