from __future__ import annotations

import os
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from functools import cache
from typing import TypeVar

import numpy as np

THREADS_ENV = "HYPERFILL_THREADS"
CHUNK_SIZE = 1024
GAUSS_NODES = 16

T = TypeVar("T")
R = TypeVar("R")


def thread_limit() -> int:
    raw = os.getenv(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def parallel_map(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """Map in input order; thread count comes from HYPERFILL_THREADS."""
    items = list(items)
    workers = min(thread_limit(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def chunked_sum(values: np.ndarray) -> float:
    flat = np.ascontiguousarray(values, dtype=float).ravel()
    if flat.size == 0:
        return 0.0
    starts = range(0, flat.size, CHUNK_SIZE)
    partials = parallel_map(lambda start: float(np.sum(flat[start : start + CHUNK_SIZE])), starts)
    total = 0.0
    for partial in partials:
        total += partial
    return total


@cache
def gauss_legendre_01(n: int = GAUSS_NODES) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def capped_subset(items: Sequence[int], cap: int) -> list[int]:
    """Evenly spaced deterministic subset, endpoints included."""
    items = list(items)
    if cap <= 0 or len(items) <= cap:
        return items
    picks = np.unique(np.round(np.linspace(0, len(items) - 1, cap)).astype(int))
    return [items[i] for i in picks]
