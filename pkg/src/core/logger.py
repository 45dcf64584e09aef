"""
Logging utility for lawline.
"""

import os
import sys
import logging
from typing import Optional
from loguru import logger
from loguru._logger import Logger

# Global handler IDs for reconfiguration
_stderr_handler_id = None
_file_handler_id = None


def configure_logging(level: str = "WARNING", log_file: Optional[str] = None) -> None:
    """
    Configure logging with the specified level for stderr.

    stdout is left to the subcommands for their summary tables. When a log file is
    given (or LAWLINE_LOG_FILE is set) it always records at DEBUG level.

    Args:
        level: Log level for stderr (default: WARNING)
        log_file: Optional path of a rotating debug log
    """
    global _stderr_handler_id, _file_handler_id

    # Reconfiguration replaces every handler
    logger.remove()

    _stderr_handler_id = logger.add(
        sys.stderr,
        level=level,
        format="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | <cyan>{extra[name]}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>",
    )

    log_file = log_file or os.getenv("LAWLINE_LOG_FILE")
    _file_handler_id = None
    if log_file:
        _file_handler_id = logger.add(
            log_file,
            rotation="10 MB",
            retention="1 week",
            level="DEBUG",
            format="{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {extra[name]}:{function}:{line} - {message}",
        )

    # Plotting libraries log font and backend chatter through stdlib logging
    LOGGERS_TO_SILENCE = ["matplotlib", "matplotlib.font_manager", "PIL", "fontTools"]

    for logger_name in LOGGERS_TO_SILENCE:
        logging.getLogger(logger_name).setLevel(logging.WARNING)


# Loggers created before configure_logging() still need a name in extra
logger.configure(extra={"name": "lawline"})
configure_logging(os.getenv("LAWLINE_LOG_LEVEL", "WARNING"))


class InterceptHandler(logging.Handler):
    """Forwards stdlib log records (matplotlib, PIL) to loguru under their logger name."""

    def emit(self, record: logging.LogRecord) -> None:
        try:
            level = logger.level(record.levelname).name
        except ValueError:
            level = record.levelno

        frame, depth = logging.currentframe(), 2
        while frame.f_code.co_filename == logging.__file__:
            frame = frame.f_back
            depth += 1

        logger.opt(depth=depth, exception=record.exc_info).bind(name=record.name).log(
            level, record.getMessage()
        )


# Plotting libraries use stdlib logging
logging.basicConfig(handlers=[InterceptHandler()], level=0)


def get_logger(name: str) -> Logger:
    """Module logger; ``name`` shows up in every line it writes."""
    return logger.bind(name=name)
