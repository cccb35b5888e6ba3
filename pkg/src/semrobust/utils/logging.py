"""
Package logger: concise console output plus a rotating debug log under ./logs.
"""

import logging
import logging.handlers
from pathlib import Path

ROOT_LOGGER = "semrobust"
LOG_FILE = Path("logs") / "semrobust.log"
LOG_FILE_MAX_BYTES = 10 * 1024 * 1024
LOG_FILE_BACKUPS = 5
CONSOLE_FORMAT = "%(levelname)s - %(message)s"
FILE_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(filename)s:%(lineno)d - %(message)s"

LEVEL_MAP = {
    name: getattr(logging, name) for name in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")
}


class SemRobustLogger:
    """Process-wide owner of the ``semrobust`` logger and its handlers."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
            cls._instance.logger = cls._configure(logging.getLogger(ROOT_LOGGER))
        return cls._instance

    @staticmethod
    def _configure(logger):
        logger.setLevel(logging.DEBUG)
        if logger.handlers:
            return logger

        console = logging.StreamHandler()
        console.setLevel(logging.INFO)
        console.setFormatter(logging.Formatter(CONSOLE_FORMAT))
        logger.addHandler(console)

        try:
            LOG_FILE.parent.mkdir(exist_ok=True)
            file_handler = logging.handlers.RotatingFileHandler(
                LOG_FILE, maxBytes=LOG_FILE_MAX_BYTES, backupCount=LOG_FILE_BACKUPS
            )
        except OSError:
            logger.warning("Could not create log file, using console output only")
            return logger
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(logging.Formatter(FILE_FORMAT))
        logger.addHandler(file_handler)
        return logger

    @property
    def console_handlers(self):
        return [
            h
            for h in self.logger.handlers
            if isinstance(h, logging.StreamHandler) and not isinstance(h, logging.FileHandler)
        ]

    def get_logger(self, name=None):
        """Logger for `name`, placed under the package logger unless it already is."""
        if not name:
            return self.logger
        if name == ROOT_LOGGER or name.startswith(f"{ROOT_LOGGER}."):
            return logging.getLogger(name)
        return self.logger.getChild(name)

    def set_level(self, level):
        """Set the console level; the log file always records DEBUG."""
        numeric = LEVEL_MAP.get(str(level).upper())
        if numeric is None:
            self.logger.warning(f"Unknown logging level: {level}")
            return
        for handler in self.console_handlers:
            handler.setLevel(numeric)


def get_logger(name=None):
    return SemRobustLogger().get_logger(name)


def set_log_level(level):
    SemRobustLogger().set_level(level)
