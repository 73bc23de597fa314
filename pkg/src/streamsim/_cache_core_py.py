"""Pure-Python cache core: set-associative tag array with LRU replacement,
line reservation, and MSHR tracking.

This is the fallback twin of the compiled extension ``_cache_core``; both
expose the same class with identical semantics, selected at import time by
``cache_hierarchy``.  The core only classifies accesses and tracks line/MSHR
state -- statistics, queue contents, and completion routing live in the
wrapper, which passes in the one piece of wrapper state the classification
needs (whether the miss queue has room).

Outcome/fail codes returned by ``access`` (packed ``outcome | fail << 4``)
match the ``AccessOutcome``/``FailOutcome`` enums:

* reads and allocating writes reserve a way and an MSHR entry on MISS;
* accesses to a reserved line merge into its MSHR entry (MSHR_HIT) until the
  merge capacity (including the original requester) is exhausted;
* non-allocating write misses only require miss-queue room;
* structural limits are checked in the order line allocation, MSHR entry,
  miss queue.
"""

from __future__ import annotations

# AccessOutcome values
HIT = 0
HIT_RESERVED = 1
MISS = 2
RESERVATION_FAIL = 3
MSHR_HIT = 4
# FailOutcome values, shifted into bits 4+ of the return code
LINE_ALLOC_FAIL = 0
MSHR_ENTRY_FAIL = 1
MSHR_MERGE_FAIL = 2
MISS_QUEUE_FULL = 3

_VALID = 1
_RESERVED = 2

# probe() results
PROBE_VALID = 0
PROBE_RESERVED = 1
PROBE_ABSENT = 2


def _fail(code: int) -> int:
    return RESERVATION_FAIL | code << 4


class CacheCore:
    """Tag/LRU/MSHR state machine for one cache instance.

    Per-line records are packed ints: bits 0-1 state, bit 2 dirty,
    bits 3+ LRU stamp.
    """

    __slots__ = ("num_sets", "num_ways", "line_size", "mshr_entries",
                 "mshr_max_merge", "write_allocate", "_sets", "_mshr", "_stamp")

    def __init__(self, num_sets: int, num_ways: int, line_size: int,
                 mshr_entries: int, mshr_max_merge: int, write_allocate: bool) -> None:
        self.num_sets = num_sets
        self.num_ways = num_ways
        self.line_size = line_size
        self.mshr_entries = mshr_entries
        self.mshr_max_merge = mshr_max_merge
        self.write_allocate = write_allocate
        self._sets: list[dict[int, int]] = [dict() for _ in range(num_sets)]
        # line_addr -> [n_requesters, has_write, [tokens...]]
        self._mshr: dict[int, list] = {}
        self._stamp = 0

    def access(self, line_addr: int, is_write: bool, token: int,
               queue_room: bool, register: bool) -> int:
        """Classify one access; returns ``outcome | fail << 4``."""
        lines = self._sets[(line_addr // self.line_size) % self.num_sets]
        rec = lines.get(line_addr)
        if rec is not None:
            state = rec & 3
            if state == _VALID:
                self._stamp += 1
                dirty = rec & 4
                if is_write and self.write_allocate:
                    dirty = 4
                lines[line_addr] = _VALID | dirty | self._stamp << 3
                return HIT
            # reserved: merge into the pending fill if capacity allows
            entry = self._mshr[line_addr]
            if entry[0] >= self.mshr_max_merge:
                return _fail(MSHR_MERGE_FAIL)
            entry[0] += 1
            if is_write:
                entry[1] = 1
            if register:
                entry[2].append(token)
            return MSHR_HIT

        # absent
        if is_write and not self.write_allocate:
            if not queue_room:
                return _fail(MISS_QUEUE_FULL)
            return MISS  # no allocation; the wrapper forwards the write down

        if len(lines) >= self.num_ways:
            victim = None
            victim_key = None
            for addr, r in lines.items():
                if r & 3 == _VALID:
                    key = (r >> 3, addr)
                    if victim_key is None or key < victim_key:
                        victim_key = key
                        victim = addr
            if victim is None:
                return _fail(LINE_ALLOC_FAIL)
            if len(self._mshr) >= self.mshr_entries:
                return _fail(MSHR_ENTRY_FAIL)
            if not queue_room:
                return _fail(MISS_QUEUE_FULL)
            del lines[victim]  # dirty evictions are silent
        else:
            if len(self._mshr) >= self.mshr_entries:
                return _fail(MSHR_ENTRY_FAIL)
            if not queue_room:
                return _fail(MISS_QUEUE_FULL)

        self._stamp += 1
        lines[line_addr] = _RESERVED | self._stamp << 3
        self._mshr[line_addr] = [1, 1 if is_write else 0,
                                 [token] if register else []]
        return MISS

    def fill(self, line_addr: int) -> tuple[int, ...]:
        """Complete a pending fill; returns the registered requester tokens."""
        lines = self._sets[(line_addr // self.line_size) % self.num_sets]
        rec = lines.get(line_addr)
        if rec is None or rec & 3 != _RESERVED:
            raise RuntimeError(f"fill for non-reserved line 0x{line_addr:x}")
        entry = self._mshr.pop(line_addr)
        dirty = 4 if (entry[1] and self.write_allocate) else 0
        lines[line_addr] = _VALID | dirty | (rec >> 3) << 3
        return tuple(entry[2])

    def probe(self, line_addr: int) -> int:
        rec = self._sets[(line_addr // self.line_size) % self.num_sets].get(line_addr)
        if rec is None:
            return PROBE_ABSENT
        return PROBE_VALID if rec & 3 == _VALID else PROBE_RESERVED

    def is_dirty(self, line_addr: int) -> bool:
        rec = self._sets[(line_addr // self.line_size) % self.num_sets].get(line_addr)
        return bool(rec is not None and rec & 4)

    def mshr_live(self) -> int:
        return len(self._mshr)

    def mshr_merge_counts(self) -> list[int]:
        return [entry[0] for entry in self._mshr.values()]
