"""Test fixtures."""
import os
import sys
from datetime import timedelta
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings, Verbosity

# modules in src/ import each other by bare name
sys.path.insert(0, str(Path(__file__).resolve().parent.parent / 'src'))

from model import ModelParams  # noqa: E402

settings.register_profile('ci', deadline=timedelta(milliseconds=2000))
settings.register_profile('dev', max_examples=10)
settings.register_profile('debug', max_examples=10, verbosity=Verbosity.verbose)
settings.load_profile(os.getenv('HYPOTHESIS_PROFILE', 'default'))

SQRT_075 = 0.75 ** 0.5


def random_params(rng: np.random.Generator, min_abs_a: float = 0.05) -> ModelParams:
    """
    One draw from the parameter sweep: |a| in [min_abs_a, 0.95] with either sign, b, B in [0.1, 3],
    |A| in [0.2, 3] with either sign
    """
    sign = lambda: rng.choice([-1.0, 1.0])  # noqa: E731
    return ModelParams(a=sign() * rng.uniform(min_abs_a, 0.95), b=rng.uniform(0.1, 3.0),
                       A=sign() * rng.uniform(0.2, 3.0), B=rng.uniform(0.1, 3.0))


@pytest.fixture
def canonical():
    """a = 0.5, b^2 = 0.75, A = B = 1: stationary variance 1."""
    return ModelParams(a=0.5, b=SQRT_075, A=1.0, B=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def param_sweep():
    generator = np.random.default_rng(7)
    return [random_params(generator) for _ in range(100)]


@pytest.fixture
def params_file(tmp_path):
    """Write a params JSON file and return its path."""
    def write(a=0.5, b=SQRT_075, A=1.0, B=1.0, name='params.json'):
        path = tmp_path / name
        path.write_text(f'{{"a": {a!r}, "b": {b!r}, "A": {A!r}, "B": {B!r}}}')
        return path
    return write
