"""
Logging bootstrap.
Loads the YAML dictConfig when it exists, falls back to basicConfig, and
routes structlog events through the same stdlib handlers.
"""

import logging
import logging.config
from pathlib import Path
from typing import Optional

import structlog
import yaml

DEFAULT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logging(level: str = "INFO", config_path: Optional[str] = None) -> None:
    """
    Configure stdlib logging and structlog.

    Args:
        level: Level applied to the package logger and the root logger
        config_path: YAML dictConfig document; ignored when missing
    """
    numeric = getattr(logging, level.upper(), logging.INFO)
    loaded = False
    if config_path and Path(config_path).is_file():
        try:
            with open(config_path, "r", encoding="utf-8") as f:
                logging.config.dictConfig(yaml.safe_load(f))
            loaded = True
        except (OSError, ValueError, yaml.YAMLError) as e:
            logging.basicConfig(level=numeric, format=DEFAULT_FORMAT)
            logging.getLogger(__name__).warning(f"Could not load {config_path}: {e}, using defaults")
    if not loaded:
        logging.basicConfig(level=numeric, format=DEFAULT_FORMAT)

    logging.getLogger().setLevel(numeric)
    logging.getLogger("twisted_slit").setLevel(numeric)

    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.processors.KeyValueRenderer(key_order=["event"], sort_keys=True),
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )
