# SPDX-FileCopyrightText: 2025 ModelCloud.ai
# SPDX-FileCopyrightText: 2025 qubitium@modelcloud.ai
# SPDX-License-Identifier: Apache-2.0
# Contact: qubitium@modelcloud.ai, x.com/qubitium

"""Shared thread-pool management and block-seeded fan-out helpers.

Monte-Carlo and sampling loops split their work into fixed-size blocks whose
randomness derives only from ``(seed, stream, block_index)``. The blocks are
then mapped over the shared executor in order, which keeps every result
independent of the worker count.
"""

from __future__ import annotations

import atexit
import os
import threading
import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Final, Iterable, List, Sequence, Tuple, TypeVar

import numpy as np

from .error import InvalidArgumentError


T = TypeVar("T")
R = TypeVar("R")

_POOL_NAME: Final[str] = "omslab-worker"


def _worker_cap() -> int:
    return max(1, (os.cpu_count() or 1) * 4)


def _coerce_workers(value: int | None) -> int:
    if value is None:
        return 1
    try:
        workers = int(value)
    except (TypeError, ValueError) as exc:  # pragma: no cover
        raise TypeError(f"worker count must be an int or None, got {value!r}") from exc
    if workers < 1:
        raise InvalidArgumentError(f"worker count must be >= 1, got {workers}")
    return min(workers, _worker_cap())


class _WorkerPool:
    """One lazily built executor whose size can change between runs."""

    def __init__(self) -> None:
        self._lock = threading.RLock()
        self._executor: ThreadPoolExecutor | None = None
        self._running = 0
        self.configured = 1

    def acquire(self, workers: int) -> ThreadPoolExecutor:
        with self._lock:
            if self._executor is None or self._running != workers:
                self._drop(wait=True)
                self._executor = ThreadPoolExecutor(max_workers=workers, thread_name_prefix=_POOL_NAME)
                self._running = workers
            return self._executor

    def _drop(self, *, wait: bool) -> None:
        executor, self._executor, self._running = self._executor, None, 0
        if executor is not None:
            executor.shutdown(wait=wait)

    def resize(self, workers: int) -> None:
        with self._lock:
            self.configured = workers
            if self._running != workers:
                self._drop(wait=True)

    def close(self, *, wait: bool = True) -> None:
        with self._lock:
            self._drop(wait=wait)


_POOL = _WorkerPool()


def ensure_thread_pool(max_workers: int | None = None) -> ThreadPoolExecutor:
    """The shared executor sized to *max_workers* (the configured size when omitted)."""

    return _POOL.acquire(_coerce_workers(max_workers if max_workers is not None else _POOL.configured))


def configure_thread_pool(*, max_workers: int | None = None, preload: bool = False) -> int:
    """Set the worker count :func:`parallel_map` uses by default and return it."""

    workers = _coerce_workers(max_workers)
    _POOL.resize(workers)
    if preload:
        ensure_thread_pool(workers)
    return workers


def shutdown_thread_pool(*, wait: bool = True) -> None:
    _POOL.close(wait=wait)


def get_thread_pool_size() -> int:
    return _POOL.configured


def parallel_map(fn: Callable[[T], R], items: Iterable[T], *, workers: int | None = None) -> List[R]:
    """Apply *fn* to every item, preserving input order in the result.

    ``workers`` overrides the configured pool size for this call. A single
    worker (or a single item) runs inline without touching the executor.
    """

    materials = list(items)
    if not materials:
        return []

    size = _coerce_workers(workers) if workers is not None else get_thread_pool_size()
    if size == 1 or len(materials) == 1:
        return [fn(item) for item in materials]

    executor = ensure_thread_pool(size)
    futures = [executor.submit(fn, item) for item in materials]
    return [future.result() for future in futures]


def block_ranges(n: int, block: int) -> List[Tuple[int, int]]:
    """Split ``range(n)`` into consecutive ``(start, stop)`` pairs of at most *block* items."""

    if n < 0:
        raise InvalidArgumentError(f"n must be >= 0, got {n}")
    if block <= 0:
        raise InvalidArgumentError(f"block must be >= 1, got {block}")
    return [(start, min(start + block, n)) for start in range(0, n, block)]


def _stream_key(stream: int | str) -> int:
    if isinstance(stream, str):
        return zlib.crc32(stream.encode("utf-8"))
    return int(stream)


def block_rng(seed: int, stream: int | str, index: int | Sequence[int] = 0) -> np.random.Generator:
    """Return the generator owned by one ``(seed, stream, index)`` block."""

    extra = (int(index),) if np.isscalar(index) else tuple(int(i) for i in index)
    sequence = np.random.SeedSequence(int(seed), spawn_key=(_stream_key(stream),) + extra)
    return np.random.default_rng(sequence)


atexit.register(shutdown_thread_pool)


__all__ = [
    "configure_thread_pool",
    "ensure_thread_pool",
    "shutdown_thread_pool",
    "get_thread_pool_size",
    "parallel_map",
    "block_ranges",
    "block_rng",
]
