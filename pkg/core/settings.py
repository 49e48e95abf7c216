# core/settings.py
from __future__ import annotations

import logging
import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

BASE_DIR = Path(__file__).resolve().parent
DEFAULT_CONFIG_DIR = BASE_DIR.parent / "configs"

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def config_dir() -> Path:
    """Directory searched for named robot configurations."""
    raw = os.getenv("PPC_CONFIG_DIR")
    return Path(raw).expanduser() if raw else DEFAULT_CONFIG_DIR


def log_level() -> int:
    name = os.getenv("PPC_LOG_LEVEL", "WARNING").upper()
    level = logging.getLevelName(name)
    return level if isinstance(level, int) else logging.WARNING


def configure_logging(level: int | None = None) -> None:
    # Entry points only; library modules just use getLogger(__name__).
    logging.basicConfig(level=level if level is not None else log_level(), format=LOG_FORMAT)
