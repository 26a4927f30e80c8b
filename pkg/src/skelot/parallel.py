"""Order-preserving thread map capped by the SKELOT_THREADS environment variable."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def worker_count(requested: int | None = None) -> int:
    env = os.environ.get("SKELOT_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            pass
    if requested is None:
        return cap
    return max(1, min(int(requested), cap))


def ordered_map(fn: Callable[[T], R], items: Iterable[T], workers: int | None = None) -> list[R]:
    """``[fn(x) for x in items]`` evaluated on a thread pool; result order is input order.

    Callers reduce the returned list sequentially, so results do not depend
    on the number of threads.
    """
    items = list(items)
    w = min(worker_count(workers), len(items))
    if w <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=w) as pool:
        return list(pool.map(fn, items))
