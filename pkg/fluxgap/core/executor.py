"""Shared worker pool for independent solves (sweep points, partition pieces)."""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, Sequence, TypeVar

from fluxgap.config import get_settings
from fluxgap.utils.logging import get_logger

logger = get_logger(__name__)

T = TypeVar("T")
R = TypeVar("R")

_executor: Optional[ThreadPoolExecutor] = None
_executor_workers = 0


def get_executor(jobs: Optional[int] = None) -> ThreadPoolExecutor:
    """Get the singleton pool, recreated when a different worker count is requested."""
    global _executor, _executor_workers
    jobs = max(1, jobs or get_settings().default_jobs)
    if _executor is None or _executor_workers != jobs:
        if _executor is not None:
            _executor.shutdown(wait=True)
        _executor = ThreadPoolExecutor(max_workers=jobs, thread_name_prefix="fluxgap")
        _executor_workers = jobs
    return _executor


def reset_executor() -> None:
    """Shut down the pool (for testing and at CLI exit)."""
    global _executor, _executor_workers
    if _executor is not None:
        _executor.shutdown(wait=True)
    _executor = None
    _executor_workers = 0


def run_ordered(func: Callable[[T], R], items: Sequence[T], jobs: Optional[int] = None) -> list[R]:
    """Map func over items, results in input order. jobs=1 runs inline."""
    jobs = max(1, jobs or get_settings().default_jobs)
    if jobs == 1 or len(items) <= 1:
        return [func(item) for item in items]
    logger.debug("Dispatching to pool", extra={"extra_data": {"items": len(items), "jobs": jobs}})
    pool = get_executor(jobs)
    futures = [pool.submit(func, item) for item in items]
    return [f.result() for f in futures]
