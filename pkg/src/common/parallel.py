"""Deterministic chunked map over a process pool."""

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def chunk_bounds(n_items: int, chunk_size: int) -> list[tuple[int, int]]:
    """Contiguous [start, stop) ranges covering n_items, left to right."""
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    return [(start, min(start + chunk_size, n_items)) for start in range(0, n_items, chunk_size)]


def map_chunks(
    func: Callable[[int, int], R],
    n_items: int,
    workers: int = 1,
    chunk_size: int = 256,
) -> list[R]:
    """Apply ``func(start, stop)`` to every chunk and return results in chunk order.

    ``func`` must be a picklable top-level callable when workers > 1. The
    chunk layout depends only on n_items and chunk_size, so results do not
    depend on the worker count.
    """
    bounds = chunk_bounds(n_items, chunk_size)
    if workers <= 1 or len(bounds) <= 1:
        return [func(start, stop) for start, stop in bounds]
    logger.debug(f"Dispatching {len(bounds)} chunks to {workers} workers")
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(func, start, stop) for start, stop in bounds]
        return [future.result() for future in futures]


def map_items(func: Callable[[T], R], items: Sequence[T], workers: int = 1) -> list[R]:
    """Order-preserving map over independent items."""
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
