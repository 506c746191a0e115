import functools
import time
from contextlib import contextmanager

from .logger import get_logger

logger = get_logger(__name__)


def time_execution(log_message=""):
    def decorator_time_execution(func):
        @functools.wraps(func)
        def wrapper_time_execution(*args, **kwargs):
            start_time = time.perf_counter()
            value = func(*args, **kwargs)
            end_time = time.perf_counter()
            elapsed_time = end_time - start_time
            logger.info(
                f"Function '{log_message if log_message else func.__name__}' " f"executed in {elapsed_time:.2f} seconds"
            )
            return value

        return wrapper_time_execution

    return decorator_time_execution


class PhaseTimer:
    """Accumulates wall time per pipeline phase.

    Usage:
        timer = PhaseTimer()
        with timer.phase("parse"):
            ...
        timer.as_dict()  # {"parse": 0.12}
    """

    def __init__(self):
        self.seconds: dict[str, float] = {}
        self.current: str | None = None

    @contextmanager
    def phase(self, name: str):
        self.current = name
        start_time = time.perf_counter()
        try:
            yield self
        finally:
            elapsed_time = time.perf_counter() - start_time
            self.seconds[name] = self.seconds.get(name, 0.0) + elapsed_time
            logger.info(f"Phase '{name}' executed in {elapsed_time:.2f} seconds")

    def as_dict(self) -> dict[str, float]:
        return {name: round(seconds, 6) for name, seconds in self.seconds.items()}
