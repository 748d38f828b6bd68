# log.py
# SPDX-License-Identifier: MIT
"""Logging setup for faceclust.

The package logger ``faceclust`` carries a NullHandler, so nothing is
printed unless the application (or the CLI) calls
:func:`configure_logging`. All diagnostics go to stderr; stdout is kept
for JSON summaries.

:class:`WarningLog` is used where a condition must be both logged and
handed back to the caller in a result object (clipped cluster counts,
skipped templates).
"""

from __future__ import annotations

import logging
import sys
from collections.abc import Iterator
from contextlib import contextmanager
from typing import IO

__all__ = [
    "PACKAGE_LOGGER_NAME",
    "DEFAULT_FORMAT",
    "resolve_level",
    "get_logger",
    "configure_logging",
    "temp_level",
    "WarningLog",
]

PACKAGE_LOGGER_NAME = "faceclust"
DEFAULT_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

logging.getLogger(PACKAGE_LOGGER_NAME).addHandler(logging.NullHandler())


def resolve_level(value: int | str) -> int:
    """Numeric level for an int or a level name such as ``"debug"``.

    Raises:
        ValueError: If the name is not a logging level.
    """
    if isinstance(value, int):
        return value
    number = logging.getLevelName(value.strip().upper())
    if not isinstance(number, int):
        raise ValueError(f"unknown log level {value!r}")
    return number


def get_logger(name: str | None = None) -> logging.Logger:
    """Logger for ``name`` (usually ``__name__``), or the package logger."""
    return logging.getLogger(name or PACKAGE_LOGGER_NAME)


def configure_logging(
    *,
    level: int | str = logging.INFO,
    stream: IO[str] | None = None,
    fmt: str | None = None,
    datefmt: str | None = None,
    propagate: bool | None = None,
    logger_name: str = PACKAGE_LOGGER_NAME,
) -> logging.Logger:
    """Attach one stderr handler to the faceclust logger and set its level.

    Repeated calls adjust the level without stacking handlers. A handler
    whose stream was closed (pytest capture does this) is pointed at the
    new stream. Propagation stays on unless ``propagate`` is False, so
    ``caplog`` keeps working.

    Raises:
        ValueError: If ``level`` is an unknown level name.
    """
    logger = get_logger(logger_name)
    logger.setLevel(resolve_level(level))
    logger.propagate = propagate is not False
    target = stream if stream is not None else sys.stderr

    streams = [h for h in logger.handlers if isinstance(h, logging.StreamHandler)]
    for handler in streams:
        if getattr(handler.stream, "closed", False):
            handler.setStream(target)
    if not streams:
        handler = logging.StreamHandler(target)
        handler.setFormatter(logging.Formatter(fmt=fmt or DEFAULT_FORMAT, datefmt=datefmt))
        logger.addHandler(handler)
    return logger


@contextmanager
def temp_level(level: int | str, name: str | None = None) -> Iterator[logging.Logger]:
    """Run a block with a logger at ``level``, restoring the old level after."""
    logger = get_logger(name)
    previous = logger.level
    logger.setLevel(resolve_level(level))
    try:
        yield logger
    finally:
        logger.setLevel(previous)


class WarningLog:
    """Collects warning messages while logging each one at WARNING."""

    def __init__(self, logger: logging.Logger) -> None:
        self._logger = logger
        self._messages: list[str] = []

    def warn(self, message: str, *args: object) -> None:
        text = message % args if args else message
        self._messages.append(text)
        self._logger.warning(text)

    @property
    def messages(self) -> tuple[str, ...]:
        return tuple(self._messages)

    def __len__(self) -> int:
        return len(self._messages)
