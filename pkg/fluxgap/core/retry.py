"""Retry utilities for numerical procedures that can widen their search."""

from typing import Callable, TypeVar

from fluxgap.utils.logging import get_logger

logger = get_logger(__name__)

T = TypeVar("T")


def retry_on_failure(
    func: Callable[[int], T],
    max_attempts: int = 2,
    retry_on: tuple[type[Exception], ...] = (Exception,),
    fallback: T | None = None,
) -> T:
    """Call func(attempt) until it succeeds. Returns fallback on final failure if given.

    The attempt index (0-based) lets the callee widen a bracket or enlarge a search space.
    """
    last_exc: Exception | None = None
    for attempt in range(max_attempts):
        try:
            return func(attempt)
        except retry_on as e:
            last_exc = e
            if attempt + 1 < max_attempts:
                logger.warning(
                    f"Retry {attempt + 1}/{max_attempts}",
                    extra={"extra_data": {"error": str(e)[:200]}},
                )
    if fallback is not None:
        return fallback
    raise last_exc  # type: ignore[misc]
