"""Thread-count control. Results are always gathered in input order."""

import os
from concurrent.futures import ThreadPoolExecutor

ENV_VAR = "BOOSTSEL_THREADS"


def thread_count():
    raw = os.environ.get(ENV_VAR, "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError:
            n = 0
        if n >= 1:
            return n
    return os.cpu_count() or 1


def ordered_map(fn, items):
    items = list(items)
    n = min(thread_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
