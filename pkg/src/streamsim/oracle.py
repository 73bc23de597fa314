"""Latency-free reference interpreter producing ground-truth per-stream
counts.

This module is the test suite's independent route: it re-implements the
coalescing rule and plain LRU caches from scratch (no code shared with the
cycle engine or the cache core) so its numbers can anchor the simulator's.

``count_accesses`` tallies the schedule- and content-independent access
totals: every load touches the L1 (or the L2 for L1-bypassing loads) and
every store touches the L1 and, being written through, the L2.  Refill reads
the L2 receives for L1 load misses are content-dependent and deliberately not
counted here.

``replay_lru`` classifies hits and misses for serialized executions by
replaying all fetches instantly, in kernel order, through one plain LRU L1
and L2 (no MSHRs, no reservations, no structural stalls).  Its counts match
the simulator exactly when kernels run one at a time and capacity never
forces an eviction disagreement (unbounded ways; every spec workload
qualifies); merged accesses to in-flight lines count as hits on both sides.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

from .cache_hierarchy import CacheConfig
from .trace_model import (WARP_SIZE, Command, KernelTrace, MemOp, TraceInstr,
                          load_kernel_traces)

LEVELS = ("L1_total", "L2")
TYPES = ("GLOBAL_R", "GLOBAL_W")

Cell = tuple[int, str, str]  # (stream, level, type)


@dataclass
class OracleReport:
    accesses: dict[Cell, int] = field(default_factory=dict)
    hits: dict[Cell, int] | None = None
    misses: dict[Cell, int] | None = None

    def acc(self, stream: int, level: str, atype: str) -> int:
        return self.accesses.get((stream, level, atype), 0)

    def hit(self, stream: int, level: str, atype: str) -> int:
        return 0 if self.hits is None else self.hits.get((stream, level, atype), 0)

    def miss(self, stream: int, level: str, atype: str) -> int:
        return 0 if self.misses is None else self.misses.get((stream, level, atype), 0)

    def streams(self) -> list[int]:
        found = {cell[0] for cell in self.accesses}
        if self.hits:
            found |= {cell[0] for cell in self.hits}
        return sorted(found)

    def _bump(self, table: dict[Cell, int], cell: Cell, by: int = 1) -> None:
        table[cell] = table.get(cell, 0) + by


def _touched_lines(instr: TraceInstr, line_size: int) -> list[int]:
    """Distinct cache lines covered by the active lanes, ascending."""
    lines = set()
    for lane in range(WARP_SIZE):
        if instr.active_mask & (1 << lane):
            addr = instr.base_addr + lane * instr.stride
            for edge in (addr, addr + instr.access_size - 1):
                lines.add((edge // line_size) * line_size)
    return sorted(lines)


def _load_kernels(commands: list[Command]) -> list[KernelTrace]:
    return load_kernel_traces(commands)


def count_accesses(commands: list[Command], l1_line_size: int = 128,
                   l2_line_size: int = 128) -> OracleReport:
    """Schedule-independent per-stream access totals per level and type."""
    report = OracleReport()
    for trace in _load_kernels(commands):
        stream = trace.cuda_stream_id
        for block in trace.blocks:
            for _, instrs in block.warps:
                for instr in instrs:
                    if instr.op is MemOp.LDG_CG:
                        n = len(_touched_lines(instr, l2_line_size))
                        report._bump(report.accesses, (stream, "L2", "GLOBAL_R"), n)
                    elif instr.op is MemOp.LDG:
                        n = len(_touched_lines(instr, l1_line_size))
                        report._bump(report.accesses, (stream, "L1_total", "GLOBAL_R"), n)
                    else:  # STG: L1 access plus the write-through copy at L2
                        n = len(_touched_lines(instr, l1_line_size))
                        report._bump(report.accesses, (stream, "L1_total", "GLOBAL_W"), n)
                        report._bump(report.accesses, (stream, "L2", "GLOBAL_W"), n)
    return report


class _LruCache:
    """Plain set-associative LRU cache over line addresses, instant fills."""

    def __init__(self, num_sets: int, num_ways: int, line_size: int,
                 write_allocate: bool) -> None:
        self.num_sets = num_sets
        self.num_ways = num_ways
        self.line_size = line_size
        self.write_allocate = write_allocate
        self.sets: list[OrderedDict[int, bool]] = [OrderedDict()
                                                   for _ in range(num_sets)]

    def _set(self, line: int) -> OrderedDict[int, bool]:
        return self.sets[(line // self.line_size) % self.num_sets]

    def _insert(self, line: int) -> None:
        lines = self._set(line)
        if len(lines) >= self.num_ways:
            lines.popitem(last=False)  # silently drop the LRU victim
        lines[line] = True

    def read(self, line: int) -> bool:
        lines = self._set(line)
        if line in lines:
            lines.move_to_end(line)
            return True
        self._insert(line)
        return False

    def write(self, line: int) -> bool:
        lines = self._set(line)
        if line in lines:
            lines.move_to_end(line)
            return True
        if self.write_allocate:
            self._insert(line)
        return False


def replay_lru(commands: list[Command],
               execution_order: list[int] | None = None,
               l1_config: CacheConfig | None = None,
               l2_config: CacheConfig | None = None) -> OracleReport:
    """Exact hit/miss classification for a serialized execution.

    ``execution_order`` lists kernel indices (in command-list order);
    kernels replay one at a time, to completion, in that order.
    """
    l1_config = l1_config or CacheConfig.l1_default()
    l2_config = l2_config or CacheConfig.l2_default()
    if l2_config.line_size < l1_config.line_size:
        raise ValueError("L2 line size must be >= L1 line size")
    kernels = _load_kernels(commands)
    order = list(range(len(kernels))) if execution_order is None else execution_order

    l1 = _LruCache(l1_config.num_sets, l1_config.num_ways, l1_config.line_size,
                   l1_config.write_allocate)
    l2 = _LruCache(l2_config.num_sets, l2_config.num_ways, l2_config.line_size,
                   l2_config.write_allocate)
    l2_ls = l2_config.line_size

    report = OracleReport()
    report.hits = {}
    report.misses = {}

    def classify(stream: int, level: str, atype: str, hit: bool) -> None:
        report._bump(report.accesses, (stream, level, atype))
        table = report.hits if hit else report.misses
        assert table is not None
        report._bump(table, (stream, level, atype))

    for idx in order:
        trace = kernels[idx]
        stream = trace.cuda_stream_id
        for block in trace.blocks:
            for _, instrs in block.warps:
                for instr in instrs:
                    if instr.op is MemOp.LDG_CG:
                        for line in _touched_lines(instr, l2_ls):
                            classify(stream, "L2", "GLOBAL_R", l2.read(line))
                    elif instr.op is MemOp.LDG:
                        for line in _touched_lines(instr, l1_config.line_size):
                            hit = l1.read(line)
                            classify(stream, "L1_total", "GLOBAL_R", hit)
                            if not hit:
                                # refill request observed by the L2
                                classify(stream, "L2", "GLOBAL_R",
                                         l2.read(line - line % l2_ls))
                    else:
                        for line in _touched_lines(instr, l1_config.line_size):
                            classify(stream, "L1_total", "GLOBAL_W", l1.write(line))
                            classify(stream, "L2", "GLOBAL_W",
                                     l2.write(line - line % l2_ls))
    return report
