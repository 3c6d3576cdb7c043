"""Ordered parallel map over a thread pool capped by PAIRPLAN_THREADS."""

from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
import logging
import os

from .const import THREADS_ENV
from .exceptions import ConfigurationError

log = logging.getLogger(__name__)


def worker_count() -> int:
    """Workers allowed by the environment, defaulting to the CPU count.

    Raises:
        ConfigurationError: If PAIRPLAN_THREADS is not a positive integer.

    """
    raw = os.environ.get(THREADS_ENV)
    if raw is None or not raw.strip():
        return os.cpu_count() or 1
    try:
        count = int(raw)
    except ValueError as err:
        raise ConfigurationError(f"{THREADS_ENV} must be an integer, got {raw!r}") from err
    if count < 1:
        raise ConfigurationError(f"{THREADS_ENV} must be positive, got {count}")
    return count


def ordered_map[T, R](fn: Callable[[T], R], items: Iterable[T], workers: int | None = None) -> list[R]:
    """Apply fn to every item; results come back in input order."""
    items = list(items)
    workers = min(workers or worker_count(), max(len(items), 1))
    if workers == 1:
        return [fn(item) for item in items]
    log.debug("Mapping %d items over %d workers", len(items), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
