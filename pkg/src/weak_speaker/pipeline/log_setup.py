from __future__ import annotations

import logging
from datetime import datetime
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional

import structlog

_HANDLER_FLAG = "_weak_speaker_file_handler"


def configure_logging(level: int = logging.INFO) -> None:
    """JSON structured events routed through the stdlib root logger."""

    logging.basicConfig(level=level, format="%(message)s")
    structlog.configure(
        processors=[
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.stdlib.add_log_level,
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            structlog.processors.JSONRenderer(),
        ],
        wrapper_class=structlog.stdlib.BoundLogger,
        logger_factory=structlog.stdlib.LoggerFactory(),
    )


def attach_file_log(log_dir: Path, command: str) -> Optional[Path]:
    """Persist this run's log records to a rotating file under `log_dir`."""

    logger = structlog.get_logger(__name__)
    try:
        log_dir.mkdir(parents=True, exist_ok=True)
        timestamp = datetime.now().strftime("%Y%m%d-%H%M%S")
        log_path = log_dir / f"weak-speaker-{command}-{timestamp}.log"
    except OSError as exc:
        logger.warning("cli.logfile.init_failed", error=str(exc))
        return None

    root_logger = logging.getLogger()
    for handler in list(root_logger.handlers):
        if getattr(handler, _HANDLER_FLAG, False):
            root_logger.removeHandler(handler)
            handler.close()

    handler = RotatingFileHandler(log_path, maxBytes=5_000_000, backupCount=3, encoding="utf-8")
    handler.setLevel(logging.INFO)
    handler.setFormatter(logging.Formatter("%(message)s"))
    setattr(handler, _HANDLER_FLAG, True)
    root_logger.addHandler(handler)
    logger.info("cli.logfile.enabled", path=str(log_path))
    return log_path


def detach_file_log() -> None:
    root_logger = logging.getLogger()
    for handler in list(root_logger.handlers):
        if getattr(handler, _HANDLER_FLAG, False):
            root_logger.removeHandler(handler)
            handler.close()
