# Logger Module
# One package logger ("stopprofiler"); modules log through its children.

import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional

ROOT_LOGGER = "stopprofiler"


class Logger:
    """Log manager (process-wide singleton)"""

    _instance = None
    _initialized = False

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self):
        if self._initialized:
            return
        self._initialized = True
        self.configured = False

    def setup(self,
              log_file: Optional[str] = None,
              level: str = "INFO",
              max_bytes: int = 10 * 1024 * 1024,
              backup_count: int = 5) -> logging.Logger:
        """
        Configure the package logger.

        Args:
            log_file: Optional log file path (rotated)
            level: Log level name
            max_bytes: Size at which the log file rotates
            backup_count: Rotated files to keep

        Returns:
            The configured package logger
        """
        logger = logging.getLogger(ROOT_LOGGER)
        logger.setLevel(getattr(logging, str(level).upper(), logging.INFO))

        # Re-running setup replaces our handlers instead of stacking them
        for handler in list(logger.handlers):
            logger.removeHandler(handler)
            handler.close()

        # stderr: stdout is reserved for command output
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setFormatter(logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        ))
        logger.addHandler(console_handler)

        if log_file:
            log_path = Path(log_file)
            log_path.parent.mkdir(parents=True, exist_ok=True)

            file_handler = RotatingFileHandler(
                log_file,
                maxBytes=max_bytes,
                backupCount=backup_count,
                encoding='utf-8'
            )
            file_handler.setFormatter(logging.Formatter(
                '%(asctime)s - %(name)s - %(levelname)s - %(filename)s:%(lineno)d - %(message)s',
                datefmt='%Y-%m-%d %H:%M:%S'
            ))
            logger.addHandler(file_handler)

        self.configured = True
        return logger

    def get_logger(self, name: str = ROOT_LOGGER) -> logging.Logger:
        """Child loggers carry no handlers of their own and propagate to the package logger"""
        if name == ROOT_LOGGER or name.startswith(ROOT_LOGGER + "."):
            return logging.getLogger(name)
        return logging.getLogger(f"{ROOT_LOGGER}.{name}")


# Global logger instance
_logger_instance = Logger()


def get_logger(name: str = ROOT_LOGGER) -> logging.Logger:
    """Convenience accessor"""
    return _logger_instance.get_logger(name)


def setup_logging(log_config: Optional[dict] = None, level: Optional[str] = None) -> logging.Logger:
    """Configure logging from the `logging` config section; `level` overrides it"""
    log_config = log_config or {}
    return _logger_instance.setup(
        log_file=log_config.get("file"),
        level=level or log_config.get("level", "INFO"),
        max_bytes=int(log_config.get("max_bytes", 10 * 1024 * 1024)),
        backup_count=int(log_config.get("backup_count", 5))
    )
