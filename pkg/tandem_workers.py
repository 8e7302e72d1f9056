"""
tandem_workers.py
──────────────────────────────────────────────
Thread pool helper for independent work items (grid points, trajectory chunks).
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from tandem_config import Config

logger = logging.getLogger("Tandem.Workers")

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(fn: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None) -> List[R]:
    """Apply fn to every item; results come back in input order."""
    items = list(items)
    workers = workers or Config.worker_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]

    with ThreadPoolExecutor(max_workers=min(workers, len(items)), thread_name_prefix="Tandem") as pool:
        return list(pool.map(fn, items))


def chunk_ranges(total: int, chunks: int) -> List[range]:
    """Split range(total) into at most `chunks` contiguous, nonempty pieces."""
    chunks = max(1, min(chunks, total))
    step, extra = divmod(total, chunks)
    ranges = []
    start = 0
    for i in range(chunks):
        stop = start + step + (1 if i < extra else 0)
        ranges.append(range(start, stop))
        start = stop
    return ranges
