# SPDX-FileCopyrightText: 2025 ModelCloud.ai
# SPDX-FileCopyrightText: 2025 qubitium@modelcloud.ai
# SPDX-License-Identifier: Apache-2.0
# Contact: qubitium@modelcloud.ai, x.com/qubitium

"""Process-wide cache of built schedules.

Schedules are immutable, so one instance per ``(kind, T, params, rescaled)``
key is shared by every caller. Eviction is first-in first-out.
"""

from __future__ import annotations

import os
from threading import RLock
from typing import Any, Callable, Dict, Final, Hashable, TypeVar, cast


T = TypeVar("T")

LIMIT_ENV: Final[str] = "OMS_LAB_SCHEDULE_CACHE_LIMIT"
_DEFAULT_LIMIT: Final[int] = 64


def _limit_from_env(raw: str | None) -> int | None:
    """``unlimited``/``none`` lift the cap; unparsable text keeps the default."""

    text = (raw or "").strip().lower()
    if not text:
        return _DEFAULT_LIMIT
    if text in {"none", "unlimited"}:
        return None
    try:
        return max(int(text), 0)
    except ValueError:
        return _DEFAULT_LIMIT


class _ScheduleStore:
    """Insertion-ordered schedule table guarded by one lock."""

    __slots__ = ("limit", "entries", "lock")

    def __init__(self, limit: int | None) -> None:
        self.limit = limit
        self.entries: Dict[Hashable, Any] = {}
        self.lock = RLock()

    def lookup(self, key: Hashable) -> Any | None:
        with self.lock:
            return self.entries.get(key)

    def insert(self, key: Hashable, value: T) -> T:
        with self.lock:
            if self.limit == 0:
                return value
            # a concurrent miss may have stored the same key first
            current = self.entries.get(key)
            if current is not None:
                return cast(T, current)
            self.entries[key] = value
            self.evict()
            return value

    def evict(self) -> None:
        if self.limit is None:
            return
        while len(self.entries) > self.limit:
            del self.entries[next(iter(self.entries))]


_STORE = _ScheduleStore(_limit_from_env(os.getenv(LIMIT_ENV)))


def cached_schedule(key: Hashable, factory: Callable[[], T]) -> T:
    """Shared instance for *key*; *factory* runs outside the lock on a miss."""

    if _STORE.limit == 0:
        return factory()
    hit = _STORE.lookup(key)
    if hit is not None:
        return cast(T, hit)
    return _STORE.insert(key, factory())


def clear_cache() -> None:
    with _STORE.lock:
        _STORE.entries.clear()


def cache_size() -> int:
    with _STORE.lock:
        return len(_STORE.entries)


def set_cache_limit(limit: int | None) -> None:
    """Cap the number of cached schedules; ``0`` disables caching, ``None`` removes the cap."""

    if limit is not None:
        try:
            limit = int(limit)
        except TypeError as exc:  # pragma: no cover
            raise TypeError(f"cache limit must be an int or None, got {limit!r}") from exc
        if limit < 0:
            raise ValueError(f"cache limit must be >= 0 or None, got {limit}")
    with _STORE.lock:
        _STORE.limit = limit
        _STORE.evict()


def get_cache_limit() -> int | None:
    return _STORE.limit


__all__ = [
    "LIMIT_ENV",
    "cached_schedule",
    "clear_cache",
    "cache_size",
    "set_cache_limit",
    "get_cache_limit",
]
