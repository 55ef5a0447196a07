"""Thread pool helpers for per-grid-point work with ordered reduction."""

from __future__ import annotations

import os
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

T = TypeVar("T")

# Block boundaries never depend on the worker count, so sums over blocks are
# bit-identical no matter how many threads run them.
BLOCK_ROWS = 256


def resolve_threads(threads: int | None) -> int:
    if threads is None or threads <= 0:
        return os.cpu_count() or 1
    return int(threads)


def row_blocks(n_rows: int, block_rows: int = BLOCK_ROWS) -> list[slice]:
    return [slice(i, min(i + block_rows, n_rows)) for i in range(0, n_rows, block_rows)]


def map_ordered(fn: Callable[[T], object], items: list[T], threads: int | None = None) -> list:
    """Apply fn to every item; results come back in input order."""
    workers = min(resolve_threads(threads), max(len(items), 1))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="regret-worker") as pool:
        return list(pool.map(fn, items))


def map_blocks(fn: Callable[[slice], object], n_rows: int, threads: int | None = None) -> list:
    """Run fn over fixed-size row blocks of [0, n_rows)."""
    return map_ordered(fn, row_blocks(n_rows), threads)
