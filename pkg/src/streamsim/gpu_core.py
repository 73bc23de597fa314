"""Cycle engine: stream-aware kernel launch window, block-to-SM scheduling,
in-order warp issue with coalescing, and the timed memory pipeline.

Event order inside one cycle is fixed for determinism:

1. launch window (at cycle 0 and on the cycle after any kernel exit);
2. block placement (round-robin over SMs with free slots, kernels by
   ascending uid, blocks in trace order, one global cursor);
3. fills due this cycle (lines become valid, merged requesters resolve);
4. instruction completions due this cycle (warps may re-issue this cycle;
   finished kernels record their exit and print their stream's breakdown);
5. accesses: per SM first the retried fetches then up to ``issue_width``
   newly issued warps (lowest warp global index first); then all L2-bound
   traffic -- one drained miss-queue entry per L1 plus every pending
   write-through forward -- is served in (sm, warp index, fetch seq) order;
6. one L2 miss-queue entry is dispatched to DRAM.

A fetch that classifies RESERVATION_FAIL is retried every cycle until it
classifies otherwise, and every retry is a fresh stat increment.  Loads hold
their warp until the data returns; stores complete at classify time plus the
L1 hit latency and propagate downward on their own.
"""

from __future__ import annotations

import heapq
import sys
from dataclasses import dataclass, field
from enum import Enum
from typing import IO

from ._cache_core_py import HIT as _HIT
from ._cache_core_py import RESERVATION_FAIL as _FAIL
from .cache_hierarchy import Cache, CacheConfig, MemFetch
from .stream_stats import (AccessType, KernelTimeTable, LegacyAggregate,
                           PerStreamCacheStats)
from .trace_model import (WARP_SIZE, Command, KernelLaunch, KernelTrace,
                          MemcpyH2D, TraceInstr, load_kernel_traces)


class InternalError(Exception):
    """Engine invariant violation; maps to exit code 2 in the CLI."""


@dataclass
class SimConfig:
    concurrent_kernel_sm: bool = True
    serialize_streams: bool = False
    num_sms: int = 4
    max_blocks_per_sm: int = 8
    issue_width: int = 1
    l1_config: CacheConfig = field(default_factory=CacheConfig.l1_default)
    l2_config: CacheConfig = field(default_factory=CacheConfig.l2_default)
    l2_miss_latency: int = 200

    def __post_init__(self) -> None:
        if self.num_sms < 1:
            raise ValueError("num_sms must be >= 1")
        if self.issue_width < 1:
            raise ValueError("issue_width must be >= 1")
        if self.max_blocks_per_sm < 1:
            raise ValueError("max_blocks_per_sm must be >= 1")
        if self.l2_miss_latency < 1:
            raise ValueError("l2_miss_latency must be >= 1")
        if self.l2_config.line_size < self.l1_config.line_size:
            raise ValueError("L2 line size must be >= L1 line size")

    @property
    def effective_serialize(self) -> bool:
        # with concurrent kernel execution disabled only one kernel may run
        return self.serialize_streams or not self.concurrent_kernel_sm


class KernelState(Enum):
    PENDING = "pending"
    RUNNING = "running"
    DONE = "done"


class KernelInstance:
    """One kernel launch; uid is assigned in launch order starting at 1."""

    __slots__ = ("name", "stream_id", "trace", "state", "uid",
                 "blocks_remaining", "next_block")

    def __init__(self, trace: KernelTrace) -> None:
        self.name = trace.name
        self.stream_id = trace.cuda_stream_id
        self.trace = trace
        self.state = KernelState.PENDING
        self.uid = 0
        self.blocks_remaining = len(trace.blocks)
        self.next_block = 0


class _Warp:
    __slots__ = ("gidx", "sm", "kernel", "instrs", "cursor", "outstanding", "block")

    def __init__(self, gidx: int, sm: "_SM", kernel: KernelInstance,
                 instrs: tuple[TraceInstr, ...]) -> None:
        self.gidx = gidx
        self.sm = sm
        self.kernel = kernel
        self.instrs = instrs
        self.cursor = 0
        self.outstanding = 0
        self.block: "_BlockRun | None" = None


class _BlockRun:
    __slots__ = ("kernel", "sm", "live_warps")

    def __init__(self, kernel: KernelInstance, sm: "_SM", live_warps: int) -> None:
        self.kernel = kernel
        self.sm = sm
        self.live_warps = live_warps


class _SM:
    __slots__ = ("index", "l1", "resident", "ready", "retry")

    def __init__(self, index: int, l1: Cache) -> None:
        self.index = index
        self.l1 = l1
        self.resident = 0
        self.ready: list[tuple[int, _Warp]] = []     # (gidx, warp) heap
        self.retry: list[tuple[int, MemFetch]] = []  # (level 1|2, fetch)


def coalesce(instr: TraceInstr, line_size: int, *, stream_id: int,
             kernel_uid: int, sm_id: int | None = None) -> list[MemFetch]:
    """Map the active lanes onto cache lines: one fetch per distinct line,
    in ascending line-address order.  An access that straddles a line
    boundary touches both lines."""
    lines: set[int] = set()
    mask = instr.active_mask
    for lane in range(WARP_SIZE):
        if mask >> lane & 1:
            addr = instr.base_addr + lane * instr.stride
            first = addr - addr % line_size
            last = addr + instr.access_size - 1
            last -= last % line_size
            lines.add(first)
            if last != first:
                lines.add(last)
    atype = AccessType.GLOBAL_W if instr.op.is_store else AccessType.GLOBAL_R
    return [MemFetch(line_addr=line, access_type=atype, stream_id=stream_id,
                     kernel_uid=kernel_uid, sm_id=sm_id,
                     l1_bypass=instr.op.l1_bypass)
            for line in sorted(lines)]


class Simulator:
    """Single-threaded, deterministic trace-driven simulation of one run."""

    def __init__(self, commands: list[Command], config: SimConfig, *,
                 stats_mode: str = "per_stream", log: IO[str] | None = None,
                 backend: str | None = None) -> None:
        if stats_mode not in ("per_stream", "legacy"):
            raise ValueError(f"unknown stats_mode {stats_mode!r}")
        self.config = config
        self.stats_mode = stats_mode
        self.log = log if log is not None else sys.stdout
        self.commands = commands
        self.sms = [
            _SM(i, Cache(f"L1_{i}", config.l1_config, backend=backend))
            for i in range(config.num_sms)
        ]
        self.l2 = Cache("L2", config.l2_config, backend=backend)
        self.time_table = KernelTimeTable()
        self.busy_streams: set[int] = set()
        self.pending: list[KernelInstance] = []
        self.running: list[KernelInstance] = []
        self.kernels: list[KernelInstance] = []  # all, in launch order
        self.placements: list[tuple[int, int, int, int]] = []  # uid, block, sm, cycle
        self.cycle = 0
        self.total_cycles = 0
        self._window_due = False
        self._next_uid = 1
        self._rr_cursor = 0
        self._warp_counter = 0
        self._fetch_seq = 0
        self._unplaced_blocks = 0
        self._prepared = False
        self._fill_events: dict[int, list[tuple]] = {}
        self._completions: dict[int, list[_Warp]] = {}

    # -- setup ------------------------------------------------------------

    def _consume_commands(self) -> None:
        traces = iter(load_kernel_traces(self.commands))
        for cmd in self.commands:
            if isinstance(cmd, MemcpyH2D):
                # no timing or cache effect; first touch of each line misses
                self.log.write(f"memcpy HtoD: dest=0x{cmd.dest_addr:x} "
                               f"size={cmd.size_bytes}\n")
            elif isinstance(cmd, KernelLaunch):
                self.pending.append(KernelInstance(next(traces)))
            else:
                raise InternalError(f"unhandled command {cmd!r}")

    # -- launch window ----------------------------------------------------

    def _run_launch_window(self, cycle: int) -> None:
        self._window_due = False
        for kernel in self.pending:
            if kernel.state is not KernelState.PENDING:
                continue
            if self.config.effective_serialize:
                if self.busy_streams:
                    break
            elif kernel.stream_id in self.busy_streams:
                continue
            self._launch(kernel, cycle)
        self.pending = [k for k in self.pending if k.state is KernelState.PENDING]

    def _launch(self, kernel: KernelInstance, cycle: int) -> None:
        kernel.uid = self._next_uid
        self._next_uid += 1
        kernel.state = KernelState.RUNNING
        self.busy_streams.add(kernel.stream_id)
        self.running.append(kernel)
        self.kernels.append(kernel)
        self._unplaced_blocks += len(kernel.trace.blocks)
        self.time_table.record_launch(kernel.stream_id, kernel.uid, cycle)
        self.log.write(f"launching kernel name: {kernel.name} uid: {kernel.uid} "
                       f"stream: {kernel.stream_id} cycle: {cycle}\n")

    # -- block scheduling ---------------------------------------------------

    def _next_free_sm(self) -> _SM | None:
        n = self.config.num_sms
        for i in range(n):
            sm = self.sms[(self._rr_cursor + i) % n]
            if sm.resident < self.config.max_blocks_per_sm:
                self._rr_cursor = (sm.index + 1) % n
                return sm
        return None

    def _schedule_blocks(self, cycle: int) -> None:
        if not self._unplaced_blocks:
            return
        for kernel in self.running:
            while kernel.next_block < len(kernel.trace.blocks):
                sm = self._next_free_sm()
                if sm is None:
                    return
                self._place_block(kernel, kernel.next_block, sm, cycle)
                kernel.next_block += 1
                self._unplaced_blocks -= 1

    def _place_block(self, kernel: KernelInstance, b_idx: int, sm: _SM,
                     cycle: int) -> None:
        block_trace = kernel.trace.blocks[b_idx]
        sm.resident += 1
        self.placements.append((kernel.uid, b_idx, sm.index, cycle))
        warps: list[_Warp] = []
        for _, instrs in block_trace.warps:
            warp = _Warp(self._warp_counter, sm, kernel, instrs)
            self._warp_counter += 1
            warps.append(warp)
        if not warps:
            # empty block: occupies its slot for one cycle, then retires
            warp = _Warp(self._warp_counter, sm, kernel, ())
            self._warp_counter += 1
            warp.outstanding = 1
            warps.append(warp)
            self._schedule_completion(warp, cycle + 1)
        block = _BlockRun(kernel, sm, len(warps))
        for warp in warps:
            warp.block = block
            if warp.instrs:
                heapq.heappush(sm.ready, (warp.gidx, warp))

    # -- events -------------------------------------------------------------

    def _schedule_completion(self, warp: _Warp, cycle: int) -> None:
        self._completions.setdefault(cycle, []).append(warp)

    def _schedule_fill(self, event: tuple, cycle: int) -> None:
        self._fill_events.setdefault(cycle, []).append(event)

    def _process_fills(self, cycle: int) -> None:
        events = self._fill_events.pop(cycle, None)
        if not events:
            return
        l2_hit = self.config.l2_config.hit_latency
        for event in events:
            if event[0] == "l2":
                for waiter in self.l2.fill(event[1], cycle):
                    if waiter[0] == "warp":
                        self._schedule_completion(waiter[1], cycle + l2_hit)
                    else:  # ("l1", sm_index, l1_line)
                        self._schedule_fill(("l1", waiter[1], waiter[2]),
                                            cycle + l2_hit)
            else:  # ("l1", sm_index, line)
                sm = self.sms[event[1]]
                hit_lat = sm.l1.config.hit_latency
                for warp in sm.l1.fill(event[2], cycle):
                    self._schedule_completion(warp, cycle + hit_lat)

    def _process_completions(self, cycle: int) -> None:
        warps = self._completions.pop(cycle, None)
        if not warps:
            return
        warps.sort(key=lambda w: w.gidx)
        finished: list[KernelInstance] = []
        for warp in warps:
            warp.outstanding -= 1
            if warp.outstanding < 0:
                raise InternalError("warp completion without outstanding fetch")
            if warp.outstanding:
                continue
            warp.cursor += 1
            if warp.cursor < len(warp.instrs):
                heapq.heappush(warp.sm.ready, (warp.gidx, warp))
                continue
            block = warp.block
            assert block is not None
            block.live_warps -= 1
            if block.live_warps:
                continue
            block.sm.resident -= 1
            kernel = block.kernel
            kernel.blocks_remaining -= 1
            if kernel.blocks_remaining == 0:
                finished.append(kernel)
        for kernel in sorted(finished, key=lambda k: k.uid):
            self._finish_kernel(kernel, cycle)

    def _finish_kernel(self, kernel: KernelInstance, cycle: int) -> None:
        if kernel.state is KernelState.DONE:
            raise InternalError(f"kernel uid={kernel.uid} completed twice")
        kernel.state = KernelState.DONE
        self.running.remove(kernel)
        self.busy_streams.discard(kernel.stream_id)
        self.time_table.record_done(kernel.stream_id, kernel.uid, cycle)
        self._emit_exit_block(kernel, cycle)
        for sm in self.sms:
            sm.l1.stats.clear_pw(kernel.stream_id)
        self.l2.stats.clear_pw(kernel.stream_id)
        self._window_due = True  # window re-runs next cycle

    # -- access pipeline ----------------------------------------------------

    def _issue_and_access(self, cycle: int) -> None:
        l2_batch: list[tuple[tuple[int, int, int], str, object]] = []
        for sm in self.sms:
            if sm.retry:
                retries = sm.retry
                sm.retry = []
                retries.sort(key=lambda e: e[1].key)
                for level, fetch in retries:
                    if level == 1:
                        self._access_l1(sm, fetch, cycle)
                    else:
                        l2_batch.append((fetch.key, "warp", fetch))
            issued = 0
            while issued < self.config.issue_width and sm.ready:
                _, warp = heapq.heappop(sm.ready)
                if warp.outstanding:
                    raise InternalError("warp issued with outstanding fetches")
                instr = warp.instrs[warp.cursor]
                line_size = (self.config.l2_config.line_size if instr.op.l1_bypass
                             else self.config.l1_config.line_size)
                fetches = coalesce(instr, line_size,
                                   stream_id=warp.kernel.stream_id,
                                   kernel_uid=warp.kernel.uid, sm_id=sm.index)
                warp.outstanding = len(fetches)
                for fetch in fetches:
                    fetch.warp = warp
                    fetch.seq = self._fetch_seq
                    self._fetch_seq += 1
                    fetch.issue_cycle = cycle
                    fetch.key = (sm.index, warp.gidx, fetch.seq)
                    if fetch.l1_bypass:
                        l2_batch.append((fetch.key, "warp", fetch))
                    else:
                        self._access_l1(sm, fetch, cycle)
                issued += 1
        # downstream traffic: one miss-queue entry per L1 plus all forwards
        for sm in self.sms:
            if sm.l1.miss_queue:
                head = sm.l1.miss_queue[0]
                l2_batch.append((head.key, "l1_queue", (sm, head)))
            if sm.l1.forward_now:
                forwards = sm.l1.forward_now
                sm.l1.forward_now = []
                for fetch in forwards:
                    l2_batch.append((fetch.key, "l1_forward", (sm, fetch)))
        l2_batch.sort(key=lambda e: e[0])
        for _, kind, payload in l2_batch:
            self._access_l2(kind, payload, cycle)

    def _access_l1(self, sm: _SM, fetch: MemFetch, cycle: int) -> None:
        l1 = sm.l1
        code = l1.access_code(fetch, cycle,
                              waiter=None if fetch.is_write else fetch.warp)
        outcome = code & 0xF
        if outcome == _FAIL:
            sm.retry.append((1, fetch))
            return
        if fetch.is_write or outcome == _HIT:
            # stores are fire-and-forget: the warp moves on after the L1
            # latency while the write propagates on its own
            self._schedule_completion(fetch.warp, cycle + l1.config.hit_latency)
        # MISS and MSHR_HIT loads resolve through the fill path

    def _l2_fetch(self, fetch: MemFetch) -> MemFetch:
        line = self.l2.line_of(fetch.line_addr)
        if line == fetch.line_addr:
            return fetch
        sub = MemFetch(line_addr=line, access_type=fetch.access_type,
                       stream_id=fetch.stream_id, kernel_uid=fetch.kernel_uid,
                       sm_id=fetch.sm_id, l1_bypass=fetch.l1_bypass,
                       issue_cycle=fetch.issue_cycle)
        sub.warp = fetch.warp
        sub.seq = fetch.seq
        sub.key = fetch.key
        return sub

    def _access_l2(self, kind: str, payload: object, cycle: int) -> None:
        l2_hit = self.config.l2_config.hit_latency
        if kind == "warp":
            fetch = payload  # type: ignore[assignment]
            code = self.l2.access_code(fetch, cycle, waiter=("warp", fetch.warp))
            outcome = code & 0xF
            if outcome == _FAIL:
                self.sms[fetch.sm_id].retry.append((2, fetch))
            elif outcome == _HIT:
                self._schedule_completion(fetch.warp, cycle + l2_hit)
            return
        sm, fetch = payload  # type: ignore[misc]
        l2fetch = self._l2_fetch(fetch)
        if kind == "l1_queue":
            if fetch.is_write:
                code = self.l2.access_code(l2fetch, cycle)
                if code & 0xF != _FAIL:
                    sm.l1.miss_queue.popleft()
            else:
                waiter = ("l1", sm.index, fetch.line_addr)
                code = self.l2.access_code(l2fetch, cycle, waiter=waiter)
                outcome = code & 0xF
                if outcome == _FAIL:
                    return  # stays at the queue head; retried next cycle
                sm.l1.miss_queue.popleft()
                if outcome == _HIT:
                    self._schedule_fill(("l1", sm.index, fetch.line_addr),
                                        cycle + l2_hit)
        elif kind == "l1_forward":
            code = self.l2.access_code(l2fetch, cycle)
            if code & 0xF == _FAIL:
                sm.l1.forward_now.append(fetch)
        else:
            raise InternalError(f"unknown L2 access kind {kind!r}")

    # -- main loop ----------------------------------------------------------

    def step(self) -> None:
        cycle = self.cycle
        if self._window_due:
            self._run_launch_window(cycle)
        self._schedule_blocks(cycle)
        self._process_fills(cycle)
        self._process_completions(cycle)
        self._issue_and_access(cycle)
        if self.l2.miss_queue:
            # one DRAM dispatch per cycle; DRAM always accepts
            request = self.l2.miss_queue.popleft()
            self._schedule_fill(("l2", request.line_addr),
                                cycle + self.config.l2_miss_latency)
        self.cycle = self._next_cycle(cycle)

    def _busy_now(self) -> bool:
        if self._window_due or self.l2.miss_queue or self._unplaced_blocks:
            return True
        for sm in self.sms:
            if sm.ready or sm.retry or sm.l1.miss_queue or sm.l1.forward_now:
                return True
        return False

    def _next_cycle(self, cycle: int) -> int:
        if self._busy_now():
            return cycle + 1
        candidates = []
        if self._fill_events:
            candidates.append(min(self._fill_events))
        if self._completions:
            candidates.append(min(self._completions))
        if not candidates:
            return cycle + 1
        return max(min(candidates), cycle + 1)

    def done(self) -> bool:
        if self.pending or self.running or self._fill_events or self._completions:
            return False
        return not self._busy_now()

    def prepare(self) -> None:
        """Consume the command list (logging memcpys, staging kernel
        launches) and arm the first launch window.  Call once before
        stepping manually; ``run`` calls it itself."""
        if self._prepared:
            raise InternalError("simulation already prepared")
        self._prepared = True
        self._consume_commands()
        self._window_due = bool(self.pending)

    def run(self) -> None:
        self.prepare()
        guard = 0
        while not self.done():
            prev = self.cycle
            self.step()
            if self.cycle == prev:
                raise InternalError("cycle did not advance")
            guard += 1
            if guard > 200_000_000:
                raise InternalError("simulation did not terminate")
        self.total_cycles = self.cycle
        self._emit_final_summary()

    # -- reporting ----------------------------------------------------------

    def merged_l1_stats(self) -> PerStreamCacheStats:
        merged = PerStreamCacheStats()
        for sm in self.sms:
            merged.merge(sm.l1.stats)
        return merged

    def merged_l1_legacy(self) -> LegacyAggregate:
        merged = LegacyAggregate()
        for sm in self.sms:
            merged.merge(sm.l1.legacy)
        return merged

    def _emit_exit_block(self, kernel: KernelInstance, cycle: int) -> None:
        start, end = self.time_table.get(kernel.stream_id, kernel.uid)
        w = self.log.write
        w(f"kernel finished: name={kernel.name} uid={kernel.uid} "
          f"stream={kernel.stream_id} start_cycle={start} end_cycle={end}\n")
        # exit-time breakdowns are indented so that only the final summary
        # carries cells at line start (one parseable copy per cell per log)
        if self.stats_mode == "per_stream":
            core = self.merged_l1_stats()
            core.print_breakdown(self.log, kernel.stream_id,
                                 "Total_core_cache_stats_breakdown", indent="  ")
            self.l2.stats.print_breakdown(self.log, kernel.stream_id,
                                          "L2_cache_stats_breakdown", indent="  ")
            w(f"  gpu_kernel_time[stream={kernel.stream_id}]"
              f"[uid={kernel.uid}] = {start}:{end}\n")
        else:
            # stream-oblivious mode prints the whole aggregate at every exit
            self.merged_l1_legacy().print_breakdown(
                self.log, "Total_core_cache_stats_breakdown", indent="  ")
            self.l2.legacy.print_breakdown(
                self.log, "L2_cache_stats_breakdown", indent="  ")

    def _emit_final_summary(self) -> None:
        w = self.log.write
        w("=== simulation summary ===\n")
        if self.stats_mode == "per_stream":
            core = self.merged_l1_stats()
            for stream in core.streams():
                core.print_breakdown(self.log, stream,
                                     "Total_core_cache_stats_breakdown")
            for stream in self.l2.stats.streams():
                self.l2.stats.print_breakdown(self.log, stream,
                                              "L2_cache_stats_breakdown")
            self.time_table.print_times(self.log)
        else:
            self.merged_l1_legacy().print_breakdown(
                self.log, "Total_core_cache_stats_breakdown")
            self.l2.legacy.print_breakdown(self.log, "L2_cache_stats_breakdown")
        w(f"gpu_total_cycles = {self.total_cycles}\n")
