"""Logging for dcpkit.

Everything logs under the ``dcpkit`` root to stderr; stdout carries only the
CLI's JSON results.
"""

import logging
import sys
import time
from contextlib import contextmanager
from typing import Dict, Iterator, Optional

from dcpkit.config import get_settings

ROOT = "dcpkit"

_PLAIN = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
_VERBOSE = "%(asctime)s - %(name)s - %(levelname)s - %(filename)s:%(lineno)d - %(message)s"


def setup_logger(
    name: str = ROOT, level: Optional[str] = None, format_string: Optional[str] = None
) -> logging.Logger:
    """
    Attach a stderr handler to ``name`` and set its level.

    Safe to call more than once: a second call only moves the level, so the
    CLI can apply ``--log-level`` after settings were read.

    Args:
        name: Logger to configure, normally the package root
        level: Level name; falls back to ``DCPKIT_LOG_LEVEL``
        format_string: Record format; development adds file and line

    Returns:
        The configured logger
    """
    settings = get_settings()
    numeric = getattr(logging, (level or settings.LOG_LEVEL).upper())
    logger = logging.getLogger(name)
    logger.setLevel(numeric)

    if logger.handlers:
        for handler in logger.handlers:
            handler.setLevel(numeric)
        return logger

    handler = logging.StreamHandler(sys.stderr)
    handler.setLevel(numeric)
    fmt = format_string or (_VERBOSE if settings.is_development else _PLAIN)
    handler.setFormatter(logging.Formatter(fmt, datefmt="%Y-%m-%d %H:%M:%S"))
    logger.addHandler(handler)
    return logger


def get_logger(name: str) -> logging.Logger:
    """Child logger; records propagate to the handler on ``dcpkit``."""
    return logging.getLogger(name)


@contextmanager
def log_stage(
    logger: logging.Logger, stage: str, timings: Optional[Dict[str, float]] = None
) -> Iterator[None]:
    """Time a pipeline stage, log its duration and add it to ``timings``."""
    start = time.perf_counter()
    try:
        yield
    finally:
        elapsed = time.perf_counter() - start
        if timings is not None:
            timings[stage] = timings.get(stage, 0.0) + elapsed
        logger.debug(f"{stage}: {elapsed:.3f}s")


class LoggerMixin:
    """Gives a class a ``logger`` named after its module and class."""

    @property
    def logger(self) -> logging.Logger:
        return get_logger(f"{type(self).__module__}.{type(self).__name__}")
