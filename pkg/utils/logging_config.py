"""
Logging-Konfiguration
"""

import logging
import os
import sys
from pathlib import Path
from typing import Optional

LOG_LEVEL_ENV = 'FSCLF_MPC_LOG_LEVEL'
LOG_FILE_NAME = 'fsclf_mpc.log'

# Markierung der von setup_logging installierten Handler
_HANDLER_TAG = '_fsclf_mpc_handler'


def _resolve_level(level: Optional[str]) -> int:
    name = (level or os.environ.get(LOG_LEVEL_ENV) or 'INFO').upper()
    value = logging.getLevelName(name)
    return value if isinstance(value, int) else logging.INFO


def setup_logging(log_dir: Optional[Path] = None, level: Optional[str] = None) -> None:
    """
    Richtet Logging ein

    Args:
        log_dir: Verzeichnis für die Log-Datei (None = nur Konsole)
        level: Konsolen-Level; Default aus FSCLF_MPC_LOG_LEVEL, sonst INFO
    """

    formatter = logging.Formatter(
        fmt='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    root_logger = logging.getLogger()
    for handler in list(root_logger.handlers):
        if getattr(handler, _HANDLER_TAG, False):
            root_logger.removeHandler(handler)
            handler.close()

    # Console-Handler (stderr)
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(_resolve_level(level))
    console_handler.setFormatter(formatter)
    setattr(console_handler, _HANDLER_TAG, True)
    root_logger.addHandler(console_handler)

    log_file = None
    if log_dir is not None:
        log_dir = Path(log_dir)
        log_dir.mkdir(parents=True, exist_ok=True)
        log_file = log_dir / LOG_FILE_NAME

        file_handler = logging.FileHandler(log_file, encoding='utf-8')
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(formatter)
        setattr(file_handler, _HANDLER_TAG, True)
        root_logger.addHandler(file_handler)

    root_logger.setLevel(logging.DEBUG)

    logging.debug("=" * 60)
    logging.debug("fsCLF-MPC gestartet")
    if log_file is not None:
        logging.debug(f"Log-Datei: {log_file}")
    logging.debug("=" * 60)
