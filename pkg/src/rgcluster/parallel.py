"""Order-preserving parallel map.

Work is always split into the same tasks regardless of worker count, and
results are combined in task order, so output is bit-identical for any
``threads`` value.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")

_threads = 1


def set_threads(n: int) -> None:
    global _threads
    _threads = max(1, int(n))


def get_threads() -> int:
    return _threads


def pmap(fn: Callable[[T], R], items: Iterable[T], threads: int | None = None) -> list:
    items = list(items)
    n = get_threads() if threads is None else max(1, int(threads))
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def pairwise_sum(values: list):
    """Fixed-shape binary-tree reduction; the tree depends only on ``len(values)``."""
    values = list(values)
    if not values:
        return 0.0
    while len(values) > 1:
        nxt = [values[i] + values[i + 1] for i in range(0, len(values) - 1, 2)]
        if len(values) % 2:
            nxt.append(values[-1])
        values = nxt
    return values[0]
