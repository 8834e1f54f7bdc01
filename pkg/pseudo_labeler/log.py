"""
Logging setup driven by the LPCG_LOG environment variable
"""
import logging
import os
import sys

ENV_VAR = "LPCG_LOG"
DEFAULT_LEVEL = logging.WARNING
FORMAT = "%(levelname)s %(name)s: %(message)s"


def resolve_level(value):
    """Map a level name or number to a logging level, None if unknown"""
    if value is None:
        return None
    if isinstance(value, int):
        return value
    text = str(value).strip()
    if not text:
        return None
    if text.lstrip("-").isdigit():
        return int(text)
    level = logging.getLevelName(text.upper())
    return level if isinstance(level, int) else None


def configure_logging(level=None, stream=None):
    """Install a single stderr handler on the root logger.

    Level comes from the argument, then $LPCG_LOG, then WARNING.
    """
    requested = level if level is not None else os.environ.get(ENV_VAR)
    resolved = resolve_level(requested)
    logging.basicConfig(
        level=resolved if resolved is not None else DEFAULT_LEVEL,
        format=FORMAT,
        stream=stream or sys.stderr,
        force=True,
    )
    if requested is not None and resolved is None:
        logging.getLogger(__name__).warning(
            "unknown log level %r, using WARNING", requested
        )
    return logging.getLogger().level
