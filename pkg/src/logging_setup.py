"""
Logging setup shared by the CLI, scripts and tests.
"""
import logging
import os
import sys
from typing import Optional

import structlog


class StderrHandler(logging.StreamHandler):
    """Stream handler bound to whatever sys.stderr is when a record is emitted"""

    def __init__(self):
        super().__init__(sys.stderr)

    @property
    def stream(self):
        return sys.stderr

    @stream.setter
    def stream(self, value):
        pass


def configure_logging(level: Optional[str] = None) -> None:
    """Configure stdlib logging and route structlog through it.

    The level comes from the argument, then DIPLOMAT_LOG_LEVEL, then INFO.
    Log lines go to stderr so transcripts on stdout stay machine-readable.
    Calling it again replaces the previous configuration.
    """
    name = (level or os.getenv("DIPLOMAT_LOG_LEVEL") or "INFO").upper()
    numeric = getattr(logging, name, logging.INFO)

    logging.basicConfig(
        level=numeric,
        handlers=[StderrHandler()],
        format='%(message)s',
        force=True,
    )
    structlog.configure(
        wrapper_class=structlog.make_filtering_bound_logger(numeric),
        logger_factory=structlog.stdlib.LoggerFactory(),
        processors=[
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.KeyValueRenderer(key_order=['timestamp', 'level', 'event'])
        ]
    )
