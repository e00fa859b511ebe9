"""Order-preserving thread fan-out for per-image and per-pair stages."""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from dcpkit.config import get_settings

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(threads: Optional[int] = None) -> int:
    """Explicit value, else DCPKIT_THREADS, never below 1."""
    if threads is None:
        threads = get_settings().THREADS
    return max(1, int(threads))


def map_ordered(
    fn: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None
) -> List[R]:
    """
    Apply ``fn`` to every item and return results in input order.

    Each result is computed by one call on one item, so outputs are identical
    for any thread count.
    """
    items = list(items)
    workers = min(resolve_threads(threads), max(1, len(items)))
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="dcpkit") as pool:
        return list(pool.map(fn, items))
