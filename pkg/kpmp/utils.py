from __future__ import annotations

import hashlib
import logging
import math
from pathlib import Path
from typing import Any, Union

import colorama
import orjson

from .constants import KPMP_LOG_LEVEL, SAVE_OPTIONS

_LEVEL_COLORS = {
    logging.DEBUG: colorama.Fore.BLUE,
    logging.INFO: colorama.Fore.GREEN,
    logging.WARNING: colorama.Fore.YELLOW,
    logging.ERROR: colorama.Fore.RED,
    logging.CRITICAL: colorama.Fore.MAGENTA,
}


class ColorFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        message = super().format(record)
        color = _LEVEL_COLORS.get(record.levelno)
        if color is None:
            return message
        return color + message + colorama.Fore.RESET


def setup_logging(level: Union[str, int, None] = None) -> None:
    """
    Install a single coloured stream handler on the ``kpmp`` logger.

    Parameters
    ----------
    level: str | int | None
        Logging level. Defaults to ``KPMP_LOG_LEVEL``.
    """
    logger = logging.getLogger("kpmp")
    logger.setLevel(level if level is not None else KPMP_LOG_LEVEL)
    for handler in list(logger.handlers):
        if getattr(handler, "_kpmp", False):
            logger.removeHandler(handler)
    handler = logging.StreamHandler()
    handler.setFormatter(ColorFormatter("%(levelname)s %(name)s: %(message)s"))
    handler._kpmp = True  # type: ignore[attr-defined]
    logger.addHandler(handler)


def wrap_angle(angle: float) -> float:
    """Normalise an angle to (-pi, pi]; angles already in range are returned unchanged."""
    if -math.pi < angle <= math.pi:
        return float(angle)
    wrapped = math.atan2(math.sin(angle), math.cos(angle))
    if wrapped <= -math.pi:
        wrapped = math.pi
    return wrapped


def angle_difference(a: float, b: float) -> float:
    return wrap_angle(a - b)


def read_json(path: Union[str, Path]) -> Any:
    return orjson.loads(Path(path).read_bytes())


def write_json(path: Union[str, Path], payload: Any, indent: bool = True) -> None:
    option = SAVE_OPTIONS | orjson.OPT_SORT_KEYS
    if indent:
        option |= orjson.OPT_INDENT_2
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(orjson.dumps(payload, option=option))


def canonical_hash(payload: Any) -> str:
    """SHA-256 of the canonical (sorted-key) JSON encoding of ``payload``."""
    encoded = orjson.dumps(payload, option=SAVE_OPTIONS | orjson.OPT_SORT_KEYS)
    return hashlib.sha256(encoded).hexdigest()
