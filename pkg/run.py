"""Entry point for the workbench."""
import json
import logging
import os
import sys
from contextlib import contextmanager
from logging.handlers import RotatingFileHandler
from typing import List, Optional

# Exit codes beyond the subcommand contract
EXIT_KEYBOARD_INTERRUPT = 130
EXIT_EXCEPTION = 70

LOG_DIR = "logs"
LOG_FILE = "workbench.log"


def _read_logging_config(path: str = "config.json") -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f).get("logging", {})
    except (FileNotFoundError, ValueError, AttributeError):
        return {}


@contextmanager
def setup_logging():
    """Set up logging configuration as a context manager."""
    os.makedirs(LOG_DIR, exist_ok=True)

    file_handler = RotatingFileHandler(
        os.path.join(LOG_DIR, LOG_FILE),
        maxBytes=10 * 1024 * 1024,  # 10MB
        backupCount=5,
        encoding="utf-8",
    )
    # Console output goes to stderr so CSV tables on stdout stay clean
    console_handler = logging.StreamHandler(sys.stderr)

    formatter = logging.Formatter(
        "%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )
    file_handler.setFormatter(formatter)
    console_handler.setFormatter(formatter)

    level_name = str(_read_logging_config().get("level", "")).upper()
    log_level = getattr(logging, level_name, None) if level_name else None
    if not isinstance(log_level, int):
        log_level = logging.INFO
        print("Warning: Could not load logging level from config, using INFO", file=sys.stderr)

    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)
    root_logger.addHandler(file_handler)
    root_logger.addHandler(console_handler)

    # Adjust levels for noisy libraries
    logging.getLogger("numba").setLevel(logging.WARNING)

    try:
        yield
    finally:
        root_logger.removeHandler(file_handler)
        root_logger.removeHandler(console_handler)
        file_handler.close()
        console_handler.close()


def housekeeping() -> None:
    """Rotate logs and prune old reports when the config asks for it."""
    from src.config import Config
    from src.log_manager import LogManager

    try:
        config = Config()
    except RuntimeError as e:
        logging.warning(f"Skipping log housekeeping: {e}")
        return
    if config.log_clear_on_startup:
        manager = LogManager(LOG_DIR, config.log_retention_days, config.log_max_size_mb,
                             reports_directory=config.output_dir)
        manager.clear_logs_on_startup()


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point with logging set up and error handling."""
    from src.cli import main as cli_main

    with setup_logging():
        try:
            housekeeping()
            return cli_main(sys.argv[1:] if argv is None else argv)
        except KeyboardInterrupt:
            logging.info("Interrupted by user (CTRL+C)")
            return EXIT_KEYBOARD_INTERRUPT
        except Exception as e:
            logging.error(f"Unhandled error: {e}", exc_info=True)
            return EXIT_EXCEPTION


if __name__ == "__main__":
    sys.exit(main())
