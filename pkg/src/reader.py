import json
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from jsonschema import Draft7Validator

from logger import LOGGER
from errors import MalformedInput
from model import ModelParams
from simulate import Trajectory
from kalman import FilterRun

__all__ = ['PARAMS_SCHEMA', 'read_params', 'parse_params', 'read_trajectory', 'write_trajectory', 'write_estimates',
           'write_matrix']

FLOAT_FORMAT = '%.17g'

PARAMS_SCHEMA: dict[str, Any] = {
    '$schema': 'http://json-schema.org/draft-07/schema#',
    'type': 'object',
    'properties': {name: {'type': 'number'} for name in ('a', 'b', 'A', 'B')},
    'required': ['a', 'b', 'A', 'B'],
}

TRAJECTORY_COLUMNS: dict[str, type] = {
    't': np.int64,
    's': np.float64,
    'x': np.float64,
}


def parse_params(values: Any, overrides: dict[str, float] = None) -> ModelParams:
    """
    Validate a params object against PARAMS_SCHEMA and build ModelParams
    :param values: decoded JSON object
    :param overrides: fields that replace those of the object (command-line flags)
    :return: ModelParams (may raise DegenerateModel)
    """
    if not isinstance(values, dict):
        raise MalformedInput('params must be a JSON object')
    values = {**values, **{k: v for k, v in (overrides or {}).items() if v is not None}}
    errors = sorted(Draft7Validator(PARAMS_SCHEMA).iter_errors(values), key=lambda e: list(e.path))
    if errors:
        raise MalformedInput('; '.join(e.message for e in errors))
    return ModelParams.from_dict(values)


def read_params(filename: Path, overrides: dict[str, float] = None) -> ModelParams:
    """
    Load model parameters from a flat {"a", "b", "A", "B"} JSON file
    :param filename: location of the params file
    :param overrides: fields that replace those of the file
    :return: ModelParams
    """
    LOGGER.debug(f'Loading parameters from "{filename}"')
    with open(filename) as file:
        try:
            # parse_constant rejects NaN / Infinity literals
            values = json.load(file, parse_constant=_reject_constant)
        except json.JSONDecodeError as e:
            raise MalformedInput(e.msg, line=e.lineno)
    return parse_params(values, overrides)


def _reject_constant(constant: str):
    raise MalformedInput(f'non-finite number {constant} in params')


def read_trajectory(filename: Path) -> Trajectory:
    """
    Load a trajectory (t,s,x) or an observations-only file (t,x) from CSV
    :param filename: location of the CSV file
    :return: Trajectory (s is None when the file has no s column)
    """
    LOGGER.info(f'Loading "{filename}"...')
    try:
        data: pd.DataFrame = pd.read_csv(filename, dtype=str, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise MalformedInput('file is empty', line=1)
    except pd.errors.ParserError as e:
        raise MalformedInput(f'cannot parse CSV: {e}')

    missing = [c for c in ('t', 'x') if c not in data.columns]
    if missing:
        raise MalformedInput(f'missing column(s) {", ".join(missing)} in header', line=1)
    if len(data) == 0:
        raise MalformedInput('no rows after the header', line=2)
    columns = [c for c in TRAJECTORY_COLUMNS if c in data.columns]

    LOGGER.debug('Ensuring all columns have the correct data types.')
    for column in columns:
        bad = pd.to_numeric(data[column], errors='coerce').isna()
        if not bad.any():
            # float() on the text is exact, pd.to_numeric can be off by one ulp
            values = data[column].astype(np.float64)
            bad = ~np.isfinite(values)
            if TRAJECTORY_COLUMNS[column] is np.int64:
                bad |= values != np.floor(values)
        if bad.any():
            row = int(np.argmax(bad.to_numpy()))
            # header is line 1
            raise MalformedInput(f'column {column}: invalid value {data[column].iloc[row]!r}', line=row + 2)
        data[column] = values.astype(TRAJECTORY_COLUMNS[column])

    expected = np.arange(1, len(data) + 1)
    if not np.array_equal(data['t'].to_numpy(), expected):
        row = int(np.argmax(data['t'].to_numpy() != expected))
        raise MalformedInput(f'column t must count 1..n, found {data["t"].iloc[row]}', line=row + 2)

    s = data['s'].to_numpy() if 's' in data.columns else None
    LOGGER.debug(f'Loaded {len(data)} steps ({"with" if s is not None else "without"} hidden states)')
    return Trajectory(x=data['x'].to_numpy(), s=s)


def write_trajectory(trajectory: Trajectory, filename: Path) -> None:
    """
    Save a trajectory as CSV with header t,s,x (t,x when there are no hidden states)
    :param trajectory: Trajectory to save
    :param filename: save location
    :return: None
    """
    data = pd.DataFrame({'t': np.arange(1, len(trajectory) + 1)})
    if trajectory.s is not None:
        data['s'] = trajectory.s
    data['x'] = trajectory.x
    data.to_csv(filename, index=False, float_format=FLOAT_FORMAT)
    LOGGER.info(f'Wrote {len(trajectory)} steps to "{filename}"')


def write_estimates(run: FilterRun, filename: Path) -> None:
    """
    Save per-step estimates as CSV with header t,estimate,aux
    :param run: FilterRun to save; the meaning of aux follows run.method.aux_name
    :param filename: save location
    :return: None
    """
    data = pd.DataFrame({'t': np.arange(1, len(run) + 1), 'estimate': run.estimates, 'aux': run.aux})
    data.to_csv(filename, index=False, float_format=FLOAT_FORMAT)
    LOGGER.info(f'Wrote {len(run)} {run.method} estimates (aux = {run.method.aux_name}) to "{filename}"')


def read_estimates(filename: Path) -> pd.DataFrame:
    return pd.read_csv(filename, dtype={'t': np.int64, 'estimate': np.float64, 'aux': np.float64},
                       float_precision='round_trip')


def write_matrix(matrix: np.ndarray, filename: Path) -> None:
    """
    Save a matrix as row-major CSV with header i,j,value and 1-based indices
    :param matrix: 2-D array
    :param filename: save location (path or text buffer)
    :return: None
    """
    rows, cols = np.indices(matrix.shape)
    data = pd.DataFrame({'i': rows.ravel() + 1, 'j': cols.ravel() + 1, 'value': matrix.ravel()})
    data.to_csv(filename, index=False, float_format=FLOAT_FORMAT)
    LOGGER.info(f'Wrote {matrix.shape[0]}x{matrix.shape[1]} matrix to "{filename}"')
