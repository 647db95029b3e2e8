# src/utils/logging_config.py
import logging
import os

from src.config.settings import settings

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging(level: int = logging.INFO):
    """Configures console logging plus an error-only log file under LOGS_DIR."""
    os.makedirs(settings.LOGS_DIR, exist_ok=True)

    logging.basicConfig(
        level=level,
        format=LOG_FORMAT,
        handlers=[logging.StreamHandler()],
    )
    # Solver libraries are chatty at INFO
    logging.getLogger("gurobipy").setLevel(logging.WARNING)

    root = logging.getLogger()
    if not any(getattr(h, "_robust_uc_error_file", False) for h in root.handlers):
        error_handler = logging.FileHandler(settings.ERROR_LOG_FILE)
        error_handler.setLevel(logging.ERROR)
        error_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        error_handler._robust_uc_error_file = True
        root.addHandler(error_handler)


def set_verbosity(verbose: bool):
    """Switches the package logger between INFO and DEBUG."""
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)


# Configure on import so every module shares the same handlers
setup_logging()
logger = logging.getLogger("robust_uc")
