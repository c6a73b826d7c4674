import logging
from typing import Optional

from qpush.config import settings

_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: Optional[str] = None) -> None:
    """Install one stream handler on the ``qpush`` logger (idempotent)."""
    logger = logging.getLogger("qpush")
    logger.setLevel((level or settings.LOG_LEVEL).upper())
    if not any(getattr(h, "_qpush", False) for h in logger.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(_FORMAT))
        handler._qpush = True
        logger.addHandler(handler)
