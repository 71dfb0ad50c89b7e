"""Order-preserving process pool, sized by the ``UDP_THREADS`` variable."""

import concurrent.futures
import os


def worker_count() -> int:
    raw = os.environ.get("UDP_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


def parallel_map(fn, items):
    items = list(items)
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with concurrent.futures.ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
