"""Memoization of per-model numerics.

Models are frozen and hashable, so they key the caches directly. The caches
are shared by every caller in the process; the lock keeps get-or-create
atomic when excursions or CLI checks run on several threads.
"""

import threading
from typing import Any, Callable, Hashable

from cachetools import LRUCache
from loguru import logger


class ModelCache:
    def __init__(self, name: str, maxsize: int):
        self.name = name
        self._cache = LRUCache(maxsize=maxsize)
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get_or_create(self, key: Hashable, factory: Callable[[], Any]) -> Any:
        with self._lock:
            if key in self._cache:
                self.hits += 1
                return self._cache[key]
            self.misses += 1
            value = factory()
            self._cache[key] = value
            logger.debug(f"{self.name} cache miss; {len(self._cache)} entries")
            return value

    def clear(self) -> None:
        with self._lock:
            self._cache.clear()
            self.hits = 0
            self.misses = 0

    def __len__(self) -> int:
        return len(self._cache)


# Site matrices (M_i, A_i) for each distinct row of a model
matrix_cache = ModelCache("matrix", maxsize=128)

# Growing phi trajectories keyed by (model, start vector)
trajectory_cache = ModelCache("trajectory", maxsize=64)
