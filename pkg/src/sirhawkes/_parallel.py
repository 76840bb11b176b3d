from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")

JOBS_ENV = "SIRHAWKES_JOBS"


def default_jobs() -> int:
    raw = os.environ.get(JOBS_ENV)
    if raw:
        return max(1, int(raw))
    return os.cpu_count() or 1


def pmap(fn: Callable[[T], R], items: Iterable[T], jobs: int | None = 1) -> list[R]:
    """Order-preserving map; uses worker processes when ``jobs > 1``."""
    items = list(items)
    jobs = default_jobs() if jobs is None else jobs
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))
