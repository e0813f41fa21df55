"""Order-preserving parallel map for replicate-style work."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Optional

ENV_THREADS = "IRONQ_THREADS"


def worker_count(n_jobs: Optional[int] = None) -> int:
    """Resolve a worker count: explicit argument, else ``$IRONQ_THREADS``, else 1."""
    if n_jobs is None:
        raw = os.environ.get(ENV_THREADS, "").strip()
        n_jobs = int(raw) if raw else 1
    if n_jobs < 1:
        n_jobs = os.cpu_count() or 1
    return n_jobs


def pmap(fn: Callable, items: Iterable, n_jobs: Optional[int] = None) -> list:
    """``[fn(x) for x in items]``, possibly across processes; results keep input order.

    ``fn`` must be picklable (a module-level function or ``functools.partial``)
    when more than one worker is used.
    """
    items = list(items)
    workers = min(worker_count(n_jobs), max(1, len(items)))
    if workers == 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))
