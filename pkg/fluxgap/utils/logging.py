"""Structured logging configuration."""

import json
import logging
import sys
from datetime import datetime, timezone
from typing import Any, Optional


def _json_like_format(record: logging.LogRecord) -> str:
    """Format log record as one JSON object per line."""
    extra: dict[str, Any] = {}
    if hasattr(record, "scenario"):
        extra["scenario"] = record.scenario
    if hasattr(record, "extra_data"):
        extra.update(record.extra_data)

    base: dict[str, Any] = {
        "timestamp": datetime.now(timezone.utc).isoformat().replace("+00:00", "Z"),
        "level": record.levelname,
        "message": record.getMessage(),
        "logger": record.name,
    }
    if extra:
        base["extra"] = extra
    if record.exc_info:
        base["exc"] = logging.Formatter().formatException(record.exc_info)
    return json.dumps(base, default=str)


class StructuredFormatter(logging.Formatter):
    """Formatter that produces structured log output."""

    def format(self, record: logging.LogRecord) -> str:
        return _json_like_format(record)


def setup_logging(level: Optional[str] = None) -> logging.Logger:
    """Configure and return the package logger (stderr, stdout is kept for data)."""
    from fluxgap.config import get_settings

    logger = logging.getLogger("fluxgap")
    logger.setLevel((level or get_settings().log_level).upper())
    if logger.handlers:
        return logger

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(StructuredFormatter())
    logger.addHandler(handler)
    logger.propagate = False
    return logger


def get_logger(name: str = "fluxgap") -> logging.Logger:
    """Get logger instance."""
    return logging.getLogger(name)
