from __future__ import annotations

import logging
import os
import sys
import typing as t
from contextlib import contextmanager

from .errors import ConfigError

if t.TYPE_CHECKING:
    from .lab import Lab

LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


def has_level_handler(logger: logging.Logger) -> bool:
    level = logger.getEffectiveLevel()
    current = logger

    while current:
        if any(handler.level <= level for handler in current.handlers):
            return True

        if not current.propagate:
            break

        current = current.parent

    return False


default_handler = logging.StreamHandler(sys.stderr)
default_handler.setFormatter(
    logging.Formatter("[%(asctime)s] %(levelname)s in %(module)s: %(message)s")
)


def log_level(lab: Lab) -> int:
    """DEBUG in debug mode, otherwise the lab's ``LOG_LEVEL``."""
    if lab.debug:
        return logging.DEBUG
    name = str(lab.config["LOG_LEVEL"]).upper()
    if name not in LEVELS:
        raise ConfigError(f"LOG_LEVEL must be one of {', '.join(LEVELS)}, got {lab.config['LOG_LEVEL']!r}")
    return logging.getLevelName(name)


def create_logger(lab: Lab) -> logging.Logger:
    """The package logger, shared by the lab and every numerical module."""
    logger = logging.getLogger(lab.name)
    logger.setLevel(log_level(lab))

    if not has_level_handler(logger):
        logger.addHandler(default_handler)

    return logger


class RunLog(logging.Handler):
    """Records of a single run, kept in memory until the artifacts are
    written. Nothing reaches the output directory when the run fails
    before that."""

    def __init__(self) -> None:
        super().__init__()
        self.lines: list[str] = []
        self.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))

    def emit(self, record: logging.LogRecord) -> None:
        try:
            self.lines.append(self.format(record))
        except Exception:
            self.handleError(record)

    def write(self, path: str | os.PathLike[str]) -> str:
        with open(path, "w", encoding="utf-8") as fp:
            fp.writelines(f"{line}\n" for line in self.lines)
        return os.fspath(path)


@contextmanager
def capture_run_log(logger: logging.Logger) -> t.Iterator[RunLog]:
    handler = RunLog()
    logger.addHandler(handler)
    try:
        yield handler
    finally:
        logger.removeHandler(handler)
