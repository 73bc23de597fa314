"""Stream-keyed statistic tables, kernel time tracking, and the legacy
stream-oblivious aggregation mode.

Every cache access is classified as an (access type, access outcome) pair and
recorded three ways: cumulative per stream, per-window per stream (the window
is the span since the stream's last kernel-exit report), and -- when an access
stalls on a structural limit -- in a per-stream fail matrix.  ``LegacyAggregate``
models the historical stream-oblivious counters, which lose one increment
whenever two different streams touch the same counter cell in the same cycle.
"""

from __future__ import annotations

from enum import IntEnum
from typing import IO, Iterable


class AccessType(IntEnum):
    GLOBAL_R = 0
    GLOBAL_W = 1


class AccessOutcome(IntEnum):
    HIT = 0
    HIT_RESERVED = 1
    MISS = 2
    RESERVATION_FAIL = 3
    MSHR_HIT = 4


class FailOutcome(IntEnum):
    LINE_ALLOC_FAIL = 0
    MSHR_ENTRY_FAIL = 1
    MSHR_MERGE_FAIL = 2
    MISS_QUEUE_FULL = 3


N_TYPES = len(AccessType)
N_OUTCOMES = len(AccessOutcome)
N_FAILS = len(FailOutcome)


def _new_matrix(width: int) -> list[list[int]]:
    return [[0] * width for _ in range(N_TYPES)]


class PerStreamCacheStats:
    """Counter matrices keyed by stream ID.

    Reading an absent (stream, type, outcome) cell yields 0; incrementing an
    absent stream creates its zeroed rows.
    """

    __slots__ = ("stats", "stats_pw", "fail_stats")

    def __init__(self) -> None:
        self.stats: dict[int, list[list[int]]] = {}
        self.stats_pw: dict[int, list[list[int]]] = {}
        self.fail_stats: dict[int, list[list[int]]] = {}

    # -- mutation ---------------------------------------------------------

    def inc_stat(self, stream: int, atype: AccessType, outcome: AccessOutcome) -> None:
        row = self.stats.get(stream)
        if row is None:
            row = self.stats[stream] = _new_matrix(N_OUTCOMES)
        row[atype][outcome] += 1

    def inc_stat_pw(self, stream: int, atype: AccessType, outcome: AccessOutcome) -> None:
        row = self.stats_pw.get(stream)
        if row is None:
            row = self.stats_pw[stream] = _new_matrix(N_OUTCOMES)
        row[atype][outcome] += 1

    def inc_fail_stat(self, stream: int, atype: AccessType, fail: FailOutcome) -> None:
        row = self.fail_stats.get(stream)
        if row is None:
            row = self.fail_stats[stream] = _new_matrix(N_FAILS)
        row[atype][fail] += 1

    def rows_for(self, stream: int) -> tuple[list[list[int]], list[list[int]], list[list[int]]]:
        """Create (if needed) and return the stream's (stats, pw, fail) row
        matrices; callers on the hot path increment cells directly."""
        stats = self.stats.get(stream)
        if stats is None:
            stats = self.stats[stream] = _new_matrix(N_OUTCOMES)
        pw = self.stats_pw.get(stream)
        if pw is None:
            pw = self.stats_pw[stream] = _new_matrix(N_OUTCOMES)
        fail = self.fail_stats.get(stream)
        if fail is None:
            fail = self.fail_stats[stream] = _new_matrix(N_FAILS)
        return stats, pw, fail

    def merge(self, source: "PerStreamCacheStats") -> None:
        """Cell-wise addition of ``source`` into this table; source unchanged."""
        for mine, theirs in (
            (self.stats, source.stats),
            (self.stats_pw, source.stats_pw),
            (self.fail_stats, source.fail_stats),
        ):
            for stream, matrix in theirs.items():
                row = mine.get(stream)
                if row is None:
                    mine[stream] = [list(r) for r in matrix]
                else:
                    for t in range(N_TYPES):
                        for i, v in enumerate(matrix[t]):
                            row[t][i] += v

    def clear_pw(self, stream: int) -> None:
        """Zero the per-window rows of one stream; other streams untouched.

        Zeroes in place so cached row references stay valid.
        """
        rows = self.stats_pw.get(stream)
        if rows is not None:
            for row in rows:
                for i in range(len(row)):
                    row[i] = 0

    # -- accessors --------------------------------------------------------

    def get(self, stream: int, atype: AccessType, outcome_or_fail: int,
            is_fail: bool = False) -> int:
        table = self.fail_stats if is_fail else self.stats
        row = table.get(stream)
        return 0 if row is None else row[atype][outcome_or_fail]

    def get_pw(self, stream: int, atype: AccessType, outcome: AccessOutcome) -> int:
        row = self.stats_pw.get(stream)
        return 0 if row is None else row[atype][outcome]

    def streams(self) -> list[int]:
        keys = set(self.stats) | set(self.fail_stats)
        return sorted(keys)

    def total(self, stream: int, atype: AccessType | None = None) -> int:
        """Sum over all outcomes (access attempts) for one stream."""
        row = self.stats.get(stream)
        if row is None:
            return 0
        if atype is None:
            return sum(sum(r) for r in row)
        return sum(row[atype])

    def fail_total(self, stream: int) -> int:
        row = self.fail_stats.get(stream)
        return 0 if row is None else sum(sum(r) for r in row)

    # -- reporting --------------------------------------------------------

    def print_breakdown(self, sink: IO[str], stream: int, cache_name: str,
                        indent: str = "") -> None:
        """Emit one line per nonzero cell of one stream, types outer and
        outcomes inner, then the analogous fail-stat lines."""
        row = self.stats.get(stream)
        if row is not None:
            for t in AccessType:
                for o in AccessOutcome:
                    v = row[t][o]
                    if v:
                        sink.write(f"{indent}{cache_name}[stream={stream}]"
                                   f"[{t.name}][{o.name}] = {v}\n")
        frow = self.fail_stats.get(stream)
        if frow is not None:
            for t in AccessType:
                for f in FailOutcome:
                    v = frow[t][f]
                    if v:
                        sink.write(f"{indent}{cache_name}_fail[stream={stream}]"
                                   f"[{t.name}][{f.name}] = {v}\n")

    def nonzero_cells(self) -> Iterable[tuple[int, AccessType, AccessOutcome, int]]:
        for stream in sorted(self.stats):
            row = self.stats[stream]
            for t in AccessType:
                for o in AccessOutcome:
                    if row[t][o]:
                        yield stream, t, o, row[t][o]

    def nonzero_fail_cells(self) -> Iterable[tuple[int, AccessType, FailOutcome, int]]:
        for stream in sorted(self.fail_stats):
            row = self.fail_stats[stream]
            for t in AccessType:
                for f in FailOutcome:
                    if row[t][f]:
                        yield stream, t, f, row[t][f]


class LegacyAggregate:
    """Stream-oblivious counters with the same-cycle cross-stream collapse.

    Each counter cell remembers the cycle and stream of its last successful
    increment.  An increment from a *different* stream in the same cycle is
    dropped, reproducing the under-count of aggregate stat tracking; repeat
    increments from the same stream in one cycle all land.
    """

    __slots__ = ("stats", "fail_stats", "_last", "_last_fail")

    def __init__(self) -> None:
        self.stats = _new_matrix(N_OUTCOMES)
        self.fail_stats = _new_matrix(N_FAILS)
        self._last = [[(-1, -1)] * N_OUTCOMES for _ in range(N_TYPES)]
        self._last_fail = [[(-1, -1)] * N_FAILS for _ in range(N_TYPES)]

    def inc(self, cycle: int, stream: int, atype: AccessType,
            outcome: AccessOutcome) -> bool:
        last_cycle, last_stream = self._last[atype][outcome]
        if last_cycle == cycle and last_stream != stream:
            return False
        self.stats[atype][outcome] += 1
        self._last[atype][outcome] = (cycle, stream)
        return True

    def inc_fail(self, cycle: int, stream: int, atype: AccessType,
                 fail: FailOutcome) -> bool:
        last_cycle, last_stream = self._last_fail[atype][fail]
        if last_cycle == cycle and last_stream != stream:
            return False
        self.fail_stats[atype][fail] += 1
        self._last_fail[atype][fail] = (cycle, stream)
        return True

    def get(self, atype: AccessType, outcome_or_fail: int, is_fail: bool = False) -> int:
        table = self.fail_stats if is_fail else self.stats
        return table[atype][outcome_or_fail]

    def merge(self, source: "LegacyAggregate") -> None:
        for t in range(N_TYPES):
            for o in range(N_OUTCOMES):
                self.stats[t][o] += source.stats[t][o]
            for f in range(N_FAILS):
                self.fail_stats[t][f] += source.fail_stats[t][f]

    def print_breakdown(self, sink: IO[str], cache_name: str, indent: str = "") -> None:
        for t in AccessType:
            for o in AccessOutcome:
                v = self.stats[t][o]
                if v:
                    sink.write(f"{indent}{cache_name}[{t.name}][{o.name}] = {v}\n")
        for t in AccessType:
            for f in FailOutcome:
                v = self.fail_stats[t][f]
                if v:
                    sink.write(f"{indent}{cache_name}_fail[{t.name}][{f.name}] = {v}\n")


class KernelTimeTable:
    """Launch/exit cycles per kernel, nested stream -> uid -> (start, end)."""

    __slots__ = ("times", "last_stream_id", "last_uid")

    def __init__(self) -> None:
        self.times: dict[int, dict[int, tuple[int, int | None]]] = {}
        self.last_stream_id: int | None = None
        self.last_uid: int | None = None

    def record_launch(self, stream: int, uid: int, cycle: int) -> None:
        self.times.setdefault(stream, {})[uid] = (cycle, None)

    def record_done(self, stream: int, uid: int, cycle: int) -> None:
        per_stream = self.times.get(stream)
        if per_stream is None or uid not in per_stream:
            raise RuntimeError(f"record_done without launch: stream={stream} uid={uid}")
        start, end = per_stream[uid]
        if end is not None:
            raise RuntimeError(f"kernel completed twice: stream={stream} uid={uid}")
        if cycle <= start:
            raise RuntimeError(f"end cycle {cycle} not after start {start}")
        per_stream[uid] = (start, cycle)
        self.last_stream_id = stream
        self.last_uid = uid

    def get(self, stream: int, uid: int) -> tuple[int, int | None]:
        return self.times[stream][uid]

    def entries(self) -> Iterable[tuple[int, int, int, int | None]]:
        """(stream, uid, start, end) rows in ascending (stream, uid) order."""
        for stream in sorted(self.times):
            for uid in sorted(self.times[stream]):
                start, end = self.times[stream][uid]
                yield stream, uid, start, end

    def print_times(self, sink: IO[str], stream: int | None = None,
                    indent: str = "") -> None:
        for s, uid, start, end in self.entries():
            if stream is not None and s != stream:
                continue
            sink.write(f"{indent}gpu_kernel_time[stream={s}][uid={uid}] = {start}:{end}\n")
