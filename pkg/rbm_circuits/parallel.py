"""Utility to fan CPU-bound work out over worker threads."""

import asyncio
import os
from collections.abc import Callable, Sequence
from typing import TypeVar

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "RBMQC_THREADS"


def thread_count() -> int:
    """Number of worker threads, from `RBMQC_THREADS` (default 1)."""
    return max(1, int(os.getenv(THREADS_ENV) or 1))


def chunks(items: Sequence[T], n_groups: int) -> list[list[T]]:
    """Split `items` into at most `n_groups` contiguous, order-preserving groups."""
    n_groups = max(1, min(n_groups, len(items)))
    size, extra = divmod(len(items), n_groups)
    groups, start = [], 0
    for g in range(n_groups):
        stop = start + size + (1 if g < extra else 0)
        groups.append(list(items[start:stop]))
        start = stop
    return [g for g in groups if g]


async def gather_groups(
    fn: Callable[[list[T]], list[R]],
    items: Sequence[T],
    n_threads: int | None = None,
) -> list[R]:
    """Run `fn` over contiguous groups of `items` in threads; results keep item order."""
    groups = chunks(items, n_threads or thread_count())
    results = await asyncio.gather(*(asyncio.to_thread(fn, group) for group in groups))
    return [r for group_result in results for r in group_result]


def run_grouped(
    fn: Callable[[list[T]], list[R]],
    items: Sequence[T],
    n_threads: int | None = None,
) -> list[R]:
    """Synchronous front end of `gather_groups`; runs inline for a single thread."""
    n_threads = n_threads or thread_count()
    if n_threads == 1 or len(items) <= 1:
        return fn(list(items))
    return asyncio.run(gather_groups(fn, items, n_threads))
