"""Deterministic chunked execution on a thread pool.

Work is always split into the same fixed-size chunks regardless of the
worker count, and results come back in chunk order, so any thread count
produces identical output.
"""

from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

T = TypeVar("T")
R = TypeVar("R")

DEFAULT_CHUNK_SIZE = 4096


def chunk_slices(n: int, chunk_size: int = DEFAULT_CHUNK_SIZE) -> list[slice]:
    """Contiguous slices covering range(n).

    Args:
        n: Number of items.
        chunk_size: Items per slice (the last one may be shorter).

    Returns:
        List of slices; empty when n == 0.
    """
    return [slice(start, min(start + chunk_size, n)) for start in range(0, n, chunk_size)]


def map_items(fn: Callable[[T], R], items: Sequence[T] | Iterable[T], threads: int = 1) -> list[R]:
    """Apply fn to every item, in order, on up to `threads` workers.

    Args:
        fn: Pure function of one item.
        items: Items to process.
        threads: Worker cap; 1 runs inline.

    Returns:
        Results in input order.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def map_chunks(
    fn: Callable[[slice], R],
    n: int,
    threads: int = 1,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> list[R]:
    """Apply fn to each chunk slice of range(n), in chunk order.

    Args:
        fn: Function of a slice.
        n: Number of items.
        threads: Worker cap; 1 runs inline.
        chunk_size: Items per chunk.

    Returns:
        One result per chunk, in order.
    """
    return map_items(fn, chunk_slices(n, chunk_size), threads)
