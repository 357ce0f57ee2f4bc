"""Thread-pool helpers.

Parallelism is capped by the ``ANCHOR_MOTION_THREADS`` environment variable.
Work is always split into chunks whose boundaries do not depend on the thread
count, and results are reassembled in input order, so outputs are identical
for any worker count.
"""

import os
from concurrent.futures import ThreadPoolExecutor

_ENV_VAR = "ANCHOR_MOTION_THREADS"


def thread_count() -> int:
    """Worker cap from the environment; defaults to the CPU count."""
    raw = os.environ.get(_ENV_VAR, "")
    if raw.strip():
        try:
            value = int(raw)
        except ValueError:
            raise ValueError(f"{_ENV_VAR} must be an integer, got {raw!r}") from None
        return max(1, value)
    return max(1, os.cpu_count() or 1)


def parallel_map(fn, items):
    """Map ``fn`` over ``items`` preserving order, using up to thread_count() workers."""
    items = list(items)
    workers = min(thread_count(), max(1, len(items)))
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
