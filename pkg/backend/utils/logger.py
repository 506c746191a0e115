import logging
import os


def get_logger(name, log_level=None):
    if log_level is None:
        debug = os.getenv("DEBUG", "False").lower() in ("true", "1", "t", "yes")
        log_level = logging.DEBUG if debug else getattr(logging, os.getenv("LOG_LEVEL", "INFO").upper(), logging.INFO)

    logging.basicConfig(
        level=log_level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[logging.FileHandler(os.getenv("DUMPSCRUB_LOG_FILE", "dumpscrub.log")), logging.StreamHandler()],
    )

    # Create and return a logger instance with the specified name
    return logging.getLogger(name)
