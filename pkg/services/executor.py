"""Order-preserving parallel map bounded by CURVESEG_THREADS."""
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Optional, TypeVar

from config.settings import settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

_worker = threading.local()


def in_worker() -> bool:
    """True on a thread started by ``parallel_map``."""
    return getattr(_worker, "active", False)


def _as_worker(func: Callable[[T], R]) -> Callable[[T], R]:
    def run(item: T) -> R:
        _worker.active = True
        return func(item)

    return run


def parallel_map(func: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> list[R]:
    """Apply ``func`` to every item; results come back in input order.

    Calls made from inside a worker run serially, so nested maps (restarts
    fitting their clusters) never hold more than ``threads`` threads.
    """
    items = list(items)
    workers = 1 if in_worker() else min(threads or settings.threads, len(items))
    if workers <= 1:
        return [func(item) for item in items]

    logger.debug(f"Running {len(items)} tasks on {workers} threads")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_as_worker(func), items))
