# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled cache core: set-associative tag array with LRU replacement,
line reservation, and MSHR tracking.

Twin of ``_cache_core_py`` with identical semantics; see that module for the
behavioral contract.  The per-line record packing (bits 0-1 state, bit 2
dirty, bits 3+ LRU stamp) and all classification rules are kept in lockstep
with the pure-Python implementation, which the test suite checks by running
both backends over the same workloads.
"""

HIT = 0
HIT_RESERVED = 1
MISS = 2
RESERVATION_FAIL = 3
MSHR_HIT = 4
LINE_ALLOC_FAIL = 0
MSHR_ENTRY_FAIL = 1
MSHR_MERGE_FAIL = 2
MISS_QUEUE_FULL = 3

cdef enum:
    _VALID = 1
    _RESERVED = 2

PROBE_VALID = 0
PROBE_RESERVED = 1
PROBE_ABSENT = 2


cdef class CacheCore:
    cdef public long long num_sets, num_ways, line_size, mshr_entries, mshr_max_merge
    cdef public bint write_allocate
    cdef list _sets
    cdef dict _mshr
    cdef long long _stamp

    def __init__(self, long long num_sets, long long num_ways, long long line_size,
                 long long mshr_entries, long long mshr_max_merge, bint write_allocate):
        self.num_sets = num_sets
        self.num_ways = num_ways
        self.line_size = line_size
        self.mshr_entries = mshr_entries
        self.mshr_max_merge = mshr_max_merge
        self.write_allocate = write_allocate
        self._sets = [dict() for _ in range(num_sets)]
        self._mshr = {}
        self._stamp = 0

    cpdef long long access(self, long long line_addr, bint is_write, long long token,
                           bint queue_room, bint register):
        cdef dict lines = <dict>self._sets[(line_addr // self.line_size) % self.num_sets]
        cdef object rec_obj = lines.get(line_addr)
        cdef long long rec, state, dirty
        cdef list entry
        cdef long long victim = 0
        cdef bint have_victim = False
        cdef long long victim_stamp = 0
        cdef long long addr, r

        if rec_obj is not None:
            rec = <long long>rec_obj
            state = rec & 3
            if state == _VALID:
                self._stamp += 1
                dirty = rec & 4
                if is_write and self.write_allocate:
                    dirty = 4
                lines[line_addr] = _VALID | dirty | self._stamp << 3
                return HIT
            entry = <list>self._mshr[line_addr]
            if <long long>entry[0] >= self.mshr_max_merge:
                return RESERVATION_FAIL | MSHR_MERGE_FAIL << 4
            entry[0] = <long long>entry[0] + 1
            if is_write:
                entry[1] = 1
            if register:
                (<list>entry[2]).append(token)
            return MSHR_HIT

        if is_write and not self.write_allocate:
            if not queue_room:
                return RESERVATION_FAIL | MISS_QUEUE_FULL << 4
            return MISS

        if len(lines) >= self.num_ways:
            for addr_obj, r_obj in lines.items():
                r = <long long>r_obj
                if r & 3 == _VALID:
                    addr = <long long>addr_obj
                    if (not have_victim or (r >> 3) < victim_stamp or
                            ((r >> 3) == victim_stamp and addr < victim)):
                        have_victim = True
                        victim_stamp = r >> 3
                        victim = addr
            if not have_victim:
                return RESERVATION_FAIL | LINE_ALLOC_FAIL << 4
            if len(self._mshr) >= self.mshr_entries:
                return RESERVATION_FAIL | MSHR_ENTRY_FAIL << 4
            if not queue_room:
                return RESERVATION_FAIL | MISS_QUEUE_FULL << 4
            del lines[victim]
        else:
            if len(self._mshr) >= self.mshr_entries:
                return RESERVATION_FAIL | MSHR_ENTRY_FAIL << 4
            if not queue_room:
                return RESERVATION_FAIL | MISS_QUEUE_FULL << 4

        self._stamp += 1
        lines[line_addr] = _RESERVED | self._stamp << 3
        self._mshr[line_addr] = [1, 1 if is_write else 0, [token] if register else []]
        return MISS

    def fill(self, long long line_addr):
        cdef dict lines = <dict>self._sets[(line_addr // self.line_size) % self.num_sets]
        cdef object rec_obj = lines.get(line_addr)
        cdef long long rec
        if rec_obj is None or (<long long>rec_obj) & 3 != _RESERVED:
            raise RuntimeError(f"fill for non-reserved line 0x{line_addr:x}")
        rec = <long long>rec_obj
        cdef list entry = <list>self._mshr.pop(line_addr)
        cdef long long dirty = 4 if (entry[1] and self.write_allocate) else 0
        lines[line_addr] = _VALID | dirty | (rec >> 3) << 3
        return tuple(<list>entry[2])

    def probe(self, long long line_addr):
        cdef dict lines = <dict>self._sets[(line_addr // self.line_size) % self.num_sets]
        cdef object rec_obj = lines.get(line_addr)
        if rec_obj is None:
            return PROBE_ABSENT
        return PROBE_VALID if (<long long>rec_obj) & 3 == _VALID else PROBE_RESERVED

    def is_dirty(self, long long line_addr):
        cdef dict lines = <dict>self._sets[(line_addr // self.line_size) % self.num_sets]
        cdef object rec_obj = lines.get(line_addr)
        return bool(rec_obj is not None and (<long long>rec_obj) & 4)

    def mshr_live(self):
        return len(self._mshr)

    def mshr_merge_counts(self):
        return [entry[0] for entry in self._mshr.values()]
