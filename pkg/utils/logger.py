from loguru import logger
from typing import Optional
import sys

from config.settings import settings

CONSOLE_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>"
)
FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} - {message}"


def setup_logger(log_level: str = "INFO", log_file: Optional[str] = None):
    """
    Configure the Loguru logger.

    Console output goes to stderr so that tables and CSV written to stdout
    stay byte-identical between runs. A rotating file sink is added only
    when a log file is configured.
    """
    logger.remove()  # Remove default handler

    logger.add(sys.stderr, level=log_level.upper(), format=CONSOLE_FORMAT)

    if log_file:
        logger.add(
            log_file,
            rotation="10 MB",
            retention="1 week",
            level=log_level.upper(),
            format=FILE_FORMAT
        )

    return logger


# Default logger instance
log = setup_logger(log_level=settings.LOG_LEVEL, log_file=settings.LOG_FILE)
