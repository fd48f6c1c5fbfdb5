"""Module logger."""

__all__ = ["get_logger", "module_logger"]

import logging

_module_logger_name = __name__.split(".")[0]
module_logger = logging.getLogger(_module_logger_name)
if _module_logger_name not in [_.name for _ in module_logger.handlers]:
    if logging.root.handlers:
        module_logger.addHandler(logging.root.handlers[0])
    else:
        import sys
        formatter = logging.Formatter(
            '%(asctime)s.%(msecs)03d:%(levelname)s:%(name)s:%(message)s',
            '%H:%M:%S')
        handler = logging.StreamHandler(stream=sys.stdout)
        handler.name = _module_logger_name
        handler.setFormatter(formatter)
        module_logger.addHandler(handler)
        del sys, formatter, handler
    module_logger.propagate = False


def get_logger(name, level=None):
    """Return a named logger below the package logger.

    Parameters
    ----------
    name : str
        Usually a class or function name.
    level : int, optional
        Logging level; default inherits from ``module_logger``.

    """
    logger = module_logger.getChild(name)
    if level is not None:
        logger.setLevel(level)
    return logger


def check_logger(obj, logger):
    """Set ``obj.logger`` from an optional Logger argument."""
    if logger is None:
        obj.logger = get_logger(obj.__class__.__name__)
    elif isinstance(logger, logging.Logger):
        obj.logger = logger
    else:
        raise ValueError(
            f"expected 'logger' to be Logger; found {type(logger)!r}")
    return obj.logger
