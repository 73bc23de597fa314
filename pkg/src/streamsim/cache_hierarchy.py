"""Cache instances: configuration, memory fetches, and the stat-reporting
wrapper around the tag/MSHR core.

The per-access classification runs in a small core selected at import time:
the compiled extension when available, otherwise the pure-Python twin.  The
wrapper owns everything around the core -- per-stream statistics, the legacy
aggregate, miss-queue contents, and requester bookkeeping for fills.
"""

from __future__ import annotations

import os
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable

from . import _cache_core_py
from .stream_stats import (AccessOutcome, AccessType, FailOutcome,
                           LegacyAggregate, PerStreamCacheStats)

try:  # compiled core is optional; semantics are identical
    from . import _cache_core  # type: ignore[attr-defined]
    HAVE_COMPILED = True
except ImportError:
    _cache_core = None  # type: ignore[assignment]
    HAVE_COMPILED = False


def available_backends() -> dict[str, Any]:
    backends: dict[str, Any] = {"pure": _cache_core_py.CacheCore}
    if HAVE_COMPILED:
        backends["compiled"] = _cache_core.CacheCore
    return backends


def resolve_backend(name: str | None = None) -> tuple[str, Any]:
    """Pick a core class: explicit name > STREAMSIM_BACKEND > compiled > pure."""
    if name is None:
        name = os.environ.get("STREAMSIM_BACKEND", "auto")
    if name in ("auto", ""):
        name = "compiled" if HAVE_COMPILED else "pure"
    backends = available_backends()
    if name not in backends:
        raise ValueError(f"unknown cache backend {name!r}; have {sorted(backends)}")
    return name, backends[name]


DEFAULT_BACKEND = resolve_backend()[0]


class WritePolicy(Enum):
    WRITE_THROUGH_NO_ALLOCATE = "write_through_no_allocate"
    WRITE_BACK_WRITE_ALLOCATE = "write_back_write_allocate"


class Probe(Enum):
    VALID = 0
    RESERVED = 1
    ABSENT = 2


def _is_pow2(v: int) -> bool:
    return v >= 1 and v & (v - 1) == 0


@dataclass
class CacheConfig:
    num_sets: int
    num_ways: int
    line_size: int
    mshr_entries: int
    mshr_max_merge: int
    miss_queue_depth: int
    hit_latency: int
    write_policy: WritePolicy

    def __post_init__(self) -> None:
        if not _is_pow2(self.num_sets):
            raise ValueError(f"num_sets must be a power of two, got {self.num_sets}")
        if not _is_pow2(self.line_size):
            raise ValueError(f"line_size must be a power of two, got {self.line_size}")
        for name in ("num_ways", "mshr_entries", "mshr_max_merge",
                     "miss_queue_depth", "hit_latency"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @classmethod
    def l1_default(cls) -> "CacheConfig":
        return cls(num_sets=64, num_ways=4, line_size=128, mshr_entries=32,
                   mshr_max_merge=8, miss_queue_depth=8, hit_latency=30,
                   write_policy=WritePolicy.WRITE_THROUGH_NO_ALLOCATE)

    @classmethod
    def l2_default(cls) -> "CacheConfig":
        return cls(num_sets=512, num_ways=16, line_size=128, mshr_entries=128,
                   mshr_max_merge=8, miss_queue_depth=32, hit_latency=100,
                   write_policy=WritePolicy.WRITE_BACK_WRITE_ALLOCATE)

    @property
    def write_allocate(self) -> bool:
        return self.write_policy is WritePolicy.WRITE_BACK_WRITE_ALLOCATE


class MemFetch:
    """One coalesced memory request for a single cache line.

    ``key`` gives the deterministic service order at the shared level:
    requests are ranked by originating SM, then warp global index, then the
    per-run fetch sequence number.  The engine fills it in at issue time.
    """

    __slots__ = ("line_addr", "access_type", "stream_id", "kernel_uid",
                 "sm_id", "l1_bypass", "issue_cycle", "warp", "seq",
                 "is_write", "key")

    def __init__(self, line_addr: int, access_type: AccessType, stream_id: int,
                 kernel_uid: int, sm_id: int | None = None,
                 l1_bypass: bool = False, issue_cycle: int = 0) -> None:
        self.line_addr = line_addr
        self.access_type = access_type
        self.stream_id = stream_id
        self.kernel_uid = kernel_uid
        self.sm_id = sm_id
        self.l1_bypass = l1_bypass
        self.issue_cycle = issue_cycle
        self.warp: Any = None  # engine routing only
        self.seq = 0
        self.is_write = access_type is AccessType.GLOBAL_W
        self.key: tuple[int, int, int] = (-1 if sm_id is None else sm_id, -1, 0)

    @property
    def sort_key(self) -> tuple[int, int, int]:
        return self.key

    def __repr__(self) -> str:
        return (f"MemFetch(line_addr=0x{self.line_addr:x}, "
                f"access_type={self.access_type.name}, stream_id={self.stream_id}, "
                f"kernel_uid={self.kernel_uid}, sm_id={self.sm_id}, "
                f"l1_bypass={self.l1_bypass})")


# hook signature: (fetch, outcome, fail_or_None)
AccessHook = Callable[[MemFetch, AccessOutcome, FailOutcome | None], None]


class Cache:
    """One cache instance reporting into per-stream and legacy stat tables.

    ``access`` classifies a fetch, records the stats, and files any
    downstream work: read misses and allocating write misses enter the miss
    queue (one entry drained per cycle by the engine); write-through writes
    that classified HIT or MSHR_HIT are appended to ``forward_now`` for
    unconditional same-cycle delivery to the next level.
    """

    def __init__(self, name: str, config: CacheConfig,
                 backend: str | None = None) -> None:
        self.name = name
        self.config = config
        self.backend_name, core_cls = resolve_backend(backend)
        self.core = core_cls(config.num_sets, config.num_ways, config.line_size,
                             config.mshr_entries, config.mshr_max_merge,
                             config.write_allocate)
        self.stats = PerStreamCacheStats()
        self.legacy = LegacyAggregate()
        self.miss_queue: deque[MemFetch] = deque()
        self.forward_now: list[MemFetch] = []
        self.hook: AccessHook | None = None
        self._waiters: dict[int, Any] = {}
        self._next_token = 0
        self.access_calls = 0
        self._mq_depth = config.miss_queue_depth
        self._write_allocate = config.write_allocate
        # per-stream (stats, pw, fail) row triples, kept hot for the access path
        self._rows: dict[int, tuple[list[list[int]], list[list[int]], list[list[int]]]] = {}

    def line_of(self, addr: int) -> int:
        return addr - addr % self.config.line_size

    def _stream_rows(self, stream: int):
        rows = self.stats.rows_for(stream)
        self._rows[stream] = rows
        return rows

    def access_code(self, fetch: MemFetch, cycle: int, waiter: Any = None) -> int:
        """Hot path: classify one access attempt, record stats, and return the
        packed ``outcome | fail << 4`` code.

        ``waiter`` is an opaque requester handle returned by a later ``fill``
        when the outcome is MISS or MSHR_HIT on a read; writes never wait
        (stores are fire-and-forget).
        """
        is_write = fetch.is_write
        register = waiter is not None and not is_write
        if register:
            token = self._next_token
            self._next_token += 1
        else:
            token = 0
        code: int = self.core.access(fetch.line_addr, is_write, token,
                                     len(self.miss_queue) < self._mq_depth,
                                     register)
        outcome = code & 0xF
        t = fetch.access_type
        stream = fetch.stream_id
        rows = self._rows.get(stream)
        if rows is None:
            rows = self._stream_rows(stream)
        rows[0][t][outcome] += 1
        rows[1][t][outcome] += 1
        self.access_calls += 1
        # same-cycle cross-stream collapse, inlined from LegacyAggregate.inc
        legacy = self.legacy
        leg_row = legacy._last[t]
        last = leg_row[outcome]
        if last[0] != cycle or last[1] == stream:
            legacy.stats[t][outcome] += 1
            leg_row[outcome] = (cycle, stream)
        if outcome == 3:  # RESERVATION_FAIL
            fail = code >> 4
            rows[2][t][fail] += 1
            leg_frow = legacy._last_fail[t]
            last = leg_frow[fail]
            if last[0] != cycle or last[1] == stream:
                legacy.fail_stats[t][fail] += 1
                leg_frow[fail] = (cycle, stream)
            if self.hook is not None:
                self.hook(fetch, AccessOutcome.RESERVATION_FAIL, FailOutcome(fail))
            return code
        if self.hook is not None:
            self.hook(fetch, AccessOutcome(outcome), None)
        if outcome == 2:  # MISS: queue the fill request (or the write itself
            # for a no-allocate write miss)
            self.miss_queue.append(fetch)
            if register:
                self._waiters[token] = waiter
        elif outcome == 4:  # MSHR_HIT
            if register:
                self._waiters[token] = waiter
            if is_write and not self._write_allocate:
                self.forward_now.append(fetch)
        elif is_write and not self._write_allocate:  # HIT on a write-through cache
            self.forward_now.append(fetch)
        return code

    def access(self, fetch: MemFetch, cycle: int, waiter: Any = None) -> AccessOutcome:
        """Classify one access attempt; see ``access_code``."""
        return AccessOutcome(self.access_code(fetch, cycle, waiter) & 0xF)

    def fill(self, line_addr: int, cycle: int) -> list[Any]:
        """Complete a pending fill; returns the registered waiters."""
        tokens = self.core.fill(line_addr)
        return [self._waiters.pop(t) for t in tokens]

    def probe(self, line_addr: int) -> Probe:
        return Probe(self.core.probe(line_addr))

    def mshr_live(self) -> int:
        return self.core.mshr_live()

    def mshr_merge_counts(self) -> list[int]:
        return self.core.mshr_merge_counts()
