"""Tiny worker-pool helper.

All heavy operations in this package are pure functions of immutable
inputs, so cells can be farmed out freely; results are always merged in
input order, which keeps outputs byte-identical regardless of the worker
count.  MBALL_THREADS caps the pool (default 1: plain sequential loop).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count() -> int:
    raw = os.environ.get("MBALL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def parallel_map(fn, items):
    """Map preserving input order; threads only when MBALL_THREADS > 1."""
    items = list(items)
    n = worker_count()
    if n <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))
