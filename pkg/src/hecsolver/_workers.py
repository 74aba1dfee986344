"""Worker pools for row-chunked kernels.

Every parallel kernel in the package is a numba ``nogil`` function over a
half-open row (or element) range.  This module splits a range into one
contiguous chunk per worker and runs the chunks on a shared thread pool.
With ``workers == 1`` the kernel is called directly on the calling thread.

Tasks running on a pool must not submit to the same pool and wait on the
result; nested callers pass ``workers=1`` to their inner kernels.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

_pools: dict[int, ThreadPoolExecutor] = {}
_lock = threading.Lock()


def check_workers(workers: int) -> int:
    workers = int(workers)
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    return workers


def get_pool(workers: int) -> ThreadPoolExecutor:
    with _lock:
        pool = _pools.get(workers)
        if pool is None:
            pool = ThreadPoolExecutor(max_workers=workers,
                                      thread_name_prefix=f"hecsolver-{workers}")
            _pools[workers] = pool
        return pool


def chunk_bounds(n: int, workers: int) -> list[int]:
    """Contiguous split of ``range(n)`` into ``workers`` near-equal chunks."""
    workers = max(1, min(workers, n)) if n > 0 else 1
    return [(n * i) // workers for i in range(workers + 1)]


def run_chunks(fn: Callable[[int, int], None], n: int, workers: int = 1) -> None:
    """Call ``fn(lo, hi)`` over a contiguous partition of ``range(n)``."""
    workers = check_workers(workers)
    if workers == 1 or n < 2:
        fn(0, n)
        return
    bounds = chunk_bounds(n, workers)
    pool = get_pool(workers)
    futures = [pool.submit(fn, lo, hi)
               for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    for f in futures:
        f.result()


def run_tasks(tasks: list[Callable[[], object]], workers: int = 1) -> list:
    """Run independent zero-argument callables, preserving result order."""
    workers = check_workers(workers)
    if workers == 1 or len(tasks) < 2:
        return [t() for t in tasks]
    pool = get_pool(workers)
    futures = [pool.submit(t) for t in tasks]
    return [f.result() for f in futures]
