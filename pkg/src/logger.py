import logging

__all__ = ['LOGGER', 'set_verbosity']

LOGGER = logging.getLogger('optfilter')
LOGGER.setLevel(level='INFO')
_handler = logging.StreamHandler()
_handler.setFormatter(logging.Formatter('[%(levelname)s] %(message)s'))
LOGGER.addHandler(_handler)


def set_verbosity(debug: bool = False, quiet: bool = False) -> None:
    """
    Set the level of the optfilter logger from the command-line flags; --debug wins over --quiet
    :param debug: show per-step detail
    :param quiet: only warnings and errors
    :return: None
    """
    LOGGER.setLevel('DEBUG' if debug else 'WARNING' if quiet else 'INFO')
