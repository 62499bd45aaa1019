"""Worker-pool helper honoring the QUADCODE_THREADS environment variable.

Parallelism is only ever applied to pure per-item functions and results are
returned in input order, so outputs are identical for any thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

from .errors import InputError

T = TypeVar("T")
R = TypeVar("R")

_ENV_VAR = "QUADCODE_THREADS"


def worker_count() -> int:
    raw = os.environ.get(_ENV_VAR)
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise InputError(f"{_ENV_VAR} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise InputError(f"{_ENV_VAR} must be >= 1, got {n}")
    return n


def ordered_map(fn: Callable[[T], R], items: Iterable[T], *, min_items: int = 64) -> list[R]:
    """Map fn over items, possibly in parallel, preserving input order."""
    seq = list(items)
    workers = worker_count()
    if workers <= 1 or len(seq) < min_items:
        return [fn(x) for x in seq]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, seq))
