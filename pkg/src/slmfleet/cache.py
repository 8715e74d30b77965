"""Capacity-bounded cache of resident models with LRU/LFU eviction.

Capacity counts models, not bytes; footprints are tracked only to report
peak resident memory. ``capacity=None`` disables eviction (used when the
cache module is turned off: models load once and stay resident).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable

LRU = "lru"
LFU = "lfu"


@dataclass
class _Entry:
    model_id: str
    footprint_mb: float
    rank: int  # registration order, the eviction tie-break
    last_access: int = 0
    access_count: int = 0


@dataclass(frozen=True)
class EnsureOutcome:
    hit: bool
    evicted: str | None
    load_duration_s: float


@dataclass(frozen=True)
class CacheState:
    capacity: int | None
    resident: tuple[dict, ...]
    hit_count: int
    miss_count: int


class ModelCache:
    def __init__(self, capacity: int | None, policy: str = LRU):
        if capacity is not None and capacity < 1:
            raise ValueError("cache capacity must be >= 1")
        if policy not in (LRU, LFU):
            raise ValueError(f"unknown eviction policy: {policy}")
        self.capacity = capacity
        self.policy = policy
        self.hit_count = 0
        self.miss_count = 0
        self.peak_footprint_mb = 0.0
        self._lock = threading.Lock()
        self._entries: dict[str, _Entry] = {}
        self._clock = 0  # strictly monotonic access counter, so LRU
        self._next_rank = 0  # timestamps never collide

    def _touch(self, entry: _Entry) -> None:
        self._clock += 1
        entry.last_access = self._clock
        entry.access_count += 1

    def _pick_victim(self) -> _Entry:
        if self.policy == LFU:
            return min(self._entries.values(), key=lambda e: (e.access_count, e.rank))
        return min(self._entries.values(), key=lambda e: e.last_access)

    def ensure_resident(
        self,
        model_id: str,
        loader: Callable[[], float],
        footprint_mb: float = 0.0,
        rank: int | None = None,
    ) -> EnsureOutcome:
        """Make the model resident, evicting per policy when full.

        ``loader`` returns the load duration and is invoked exactly once per
        miss; if it raises, the miss is still counted and the model stays
        non-resident. ``rank`` is the registration index used to break
        eviction ties (defaults to first-seen order).
        """
        with self._lock:
            entry = self._entries.get(model_id)
            if entry is not None:
                self.hit_count += 1
                self._touch(entry)
                return EnsureOutcome(hit=True, evicted=None, load_duration_s=0.0)

            self.miss_count += 1
            evicted = None
            if self.capacity is not None and len(self._entries) >= self.capacity:
                victim = self._pick_victim()
                del self._entries[victim.model_id]
                evicted = victim.model_id

            duration = loader()

            if rank is None:
                rank = self._next_rank
            self._next_rank = max(self._next_rank, rank) + 1
            entry = _Entry(model_id, footprint_mb, rank)
            self._entries[model_id] = entry
            self._touch(entry)
            self.peak_footprint_mb = max(self.peak_footprint_mb, self.resident_footprint_mb())
            return EnsureOutcome(hit=False, evicted=evicted, load_duration_s=duration)

    def discard(self, model_id: str) -> bool:
        """Drop a resident model without counting an access (deregistration)."""
        with self._lock:
            return self._entries.pop(model_id, None) is not None

    def resident_ids(self) -> frozenset[str]:
        with self._lock:
            return frozenset(self._entries)

    def resident_footprint_mb(self) -> float:
        return sum(e.footprint_mb for e in list(self._entries.values()))

    def hit_rate(self) -> float:
        total = self.hit_count + self.miss_count
        if total == 0:
            raise ValueError("no accesses recorded")
        return self.hit_count / total

    def state(self) -> CacheState:
        with self._lock:
            resident = tuple(
                {
                    "model_id": e.model_id,
                    "footprint_mb": e.footprint_mb,
                    "last_access": e.last_access,
                    "access_count": e.access_count,
                }
                for e in self._entries.values()
            )
            return CacheState(self.capacity, resident, self.hit_count, self.miss_count)

    def __contains__(self, model_id: str) -> bool:
        with self._lock:
            return model_id in self._entries

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)
