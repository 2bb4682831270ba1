import os
import sys
from enum import Enum
from typing import Any, Optional
from pathlib import Path
from configparser import ConfigParser

from logger import LOGGER


__all__ = ['Method', 'ExitCode', 'DEFAULT_CONFIG', 'print_logo', 'error', 'parse_config']

DEFAULT_CONFIG: dict[str, dict[str, str]] = {
    'grid': {'points': '2001', 'half_width_sds': '8.0'},
    'compare': {'tol': '1e-9'},
    'montecarlo': {'trials': '200000', 'chunk_size': '10000', 'processes': str(os.cpu_count() or 1)},
    'psi': {'overflow_guard': repr(sys.float_info.max / 1e6)},
}


class Method(Enum):
    """
    Conditional-mean estimators; the value is the tag written to reports and estimate files
    """
    KALMAN            = 'kalman'
    DOBROVIDOV        = 'dobrovidov-recursive'
    DOBROVIDOV_DIRECT = 'dobrovidov-direct'
    DOBROVIDOV_SCORE  = 'dobrovidov-score'
    NORMALCORR        = 'normalcorr'
    GRID              = 'grid-oracle'

    def __str__(self):
        return self.value

    @classmethod
    def from_name(cls, name: str) -> 'Method':
        """
        Resolve a command-line method name (short names 'dobrovidov' and 'grid' included) or a tag
        :param name: method name as typed by the user
        :return: Method
        """
        aliases = {'dobrovidov': cls.DOBROVIDOV, 'grid': cls.GRID}
        if name in aliases:
            return aliases[name]
        return cls(name)

    @property
    def aux_name(self) -> str:
        return 'sigma' if self in (Method.DOBROVIDOV, Method.DOBROVIDOV_DIRECT, Method.DOBROVIDOV_SCORE) \
            else 'gamma'


class ExitCode(Enum):
    OK         = 0
    DIVERGENCE = 1
    USAGE      = 2
    IO         = 3
    PARSE      = 4


def print_logo() -> None:
    LOGGER.info(r'''
             __  _____ ____
  ____  ____/ /_/ __(_) / /____  _____
 / __ \/ __ \ __/ /_/ / / __/ _ \/ ___/
/ /_/ / /_/ / /_/ __/ / / /_/  __/ /
\____/ .___/\__/_/ /_/_/\__/\___/_/
    /_/
''')


def error(message: str, code: ExitCode = ExitCode.USAGE):
    LOGGER.error(message)
    sys.exit(code.value)


def parse_config(file: Optional[Path], explicit: bool = False) -> dict[str, Any]:
    """
    Parse the optfilter INI config file and return the tool defaults
    :param file: Config file (ini format)
    :param explicit: the file was named on the command line, so it must exist
    :return: dict with grid_points, half_width_sds, tol, trials, chunk_size, processes, overflow_guard
    """
    config = ConfigParser()
    config.read_dict(DEFAULT_CONFIG)
    if file is not None:
        LOGGER.debug(f"Using config file: '{str(file)}'")
        try:
            with open(file) as f:
                config.read_file(f)
        except FileNotFoundError:
            if explicit:
                error(f"Config file '{file}' not found.", ExitCode.IO)
            LOGGER.debug(f"No config file at '{file}', using defaults")

    try:
        return {
            'grid_points': config.getint('grid', 'points'),
            'half_width_sds': config.getfloat('grid', 'half_width_sds'),
            'tol': config.getfloat('compare', 'tol'),
            'trials': config.getint('montecarlo', 'trials'),
            'chunk_size': config.getint('montecarlo', 'chunk_size'),
            'processes': config.getint('montecarlo', 'processes'),
            'overflow_guard': config.getfloat('psi', 'overflow_guard'),
        }
    except ValueError as e:
        error(f"Invalid value in config file '{file}': {e}", ExitCode.PARSE)
