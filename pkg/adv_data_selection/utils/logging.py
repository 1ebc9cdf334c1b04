"""
Logging setup for adversarial data-selection training.
"""

import sys
from typing import Optional

from loguru import logger

from adv_data_selection.config import get_settings

_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss.SSS}</green> | <level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan> - <level>{message}</level>"
)


def setup_logging(level: Optional[str] = None, serialize: Optional[bool] = None) -> None:
    """
    Replace loguru's default handler with a single stderr sink.

    Args:
        level: Minimum level; defaults to the ADS_LOG_LEVEL setting
        serialize: Emit JSON records instead of text; defaults to ADS_LOG_SERIALIZE
    """
    settings = get_settings()
    logger.remove()
    logger.add(
        sys.stderr,
        level=(level or settings.log_level).upper(),
        serialize=settings.log_serialize if serialize is None else serialize,
        format=_FORMAT,
    )
