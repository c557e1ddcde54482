"""Counter-based seeding and order-preserving parallel map."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

from .errors import DomainError

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "SPLITMETRIC_THREADS"


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise DomainError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def item_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for work item ``key`` under ``seed``.

    The stream depends only on ``(seed, key)``, never on which worker runs
    the item or in what order, which is what makes every seeded computation
    in this package schedule independent.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def resolve_threads(threads: int | None = None) -> int:
    """Worker count from the argument, else ``$SPLITMETRIC_THREADS``, else 1."""
    if threads is None:
        env = os.environ.get(THREADS_ENV, "").strip()
        if not env:
            return 1
        try:
            threads = int(env)
        except ValueError:
            raise DomainError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    if threads < 1:
        raise DomainError(f"threads must be >= 1, got {threads}")
    return threads


def chunk_bounds(count: int, size: int) -> list[tuple[int, int]]:
    """Split ``range(count)`` into fixed-size half-open blocks."""
    return [(lo, min(lo + size, count)) for lo in range(0, count, size)]


def ordered_map(fn: Callable[[T], R], items: Sequence[T], threads: int | None = None) -> list[R]:
    """Apply ``fn`` to ``items`` and return results in input order."""
    n = resolve_threads(threads)
    if n == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))

