# Parallel Map Module

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(func: Callable[[T], R], items: Iterable[T], threads: int = 0) -> List[R]:
    """
    Map `func` over `items`, keeping input order.

    threads == 0 runs in the calling thread. Results are collected in input
    order either way, so callers that combine them deterministically get the
    same answer sequentially and in parallel.
    """
    items = list(items)
    if threads <= 0 or len(items) < 2:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))
