import io
import re

import pytest

from streamsim.cache_hierarchy import CacheConfig, available_backends
from streamsim.gpu_core import SimConfig, Simulator

BACKENDS = sorted(available_backends())


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def unbounded_cache(base: CacheConfig) -> CacheConfig:
    """Copy of a cache config with structural limits too large to bind."""
    return CacheConfig(
        num_sets=base.num_sets,
        num_ways=1 << 20,
        line_size=base.line_size,
        mshr_entries=1 << 20,
        mshr_max_merge=1 << 20,
        miss_queue_depth=1 << 20,
        hit_latency=base.hit_latency,
        write_policy=base.write_policy,
    )


def unbounded_config(**kwargs) -> SimConfig:
    return SimConfig(
        l1_config=unbounded_cache(CacheConfig.l1_default()),
        l2_config=unbounded_cache(CacheConfig.l2_default()),
        **kwargs,
    )


def run_sim(commands, config=None, **kwargs):
    """Run a simulation to completion; returns (sim, log text)."""
    log = io.StringIO()
    sim = Simulator(commands, config or SimConfig(), log=log, **kwargs)
    sim.run()
    return sim, log.getvalue()


def write_kernel(tmp_path, name, stream, blocks, block_dim=(32, 1, 1),
                 kernel_id=1, filename=None):
    """Write a trace file; blocks is a list of blocks, each a list of warps,
    each a list of TraceInstr."""
    lines = [
        f"-kernel name = {name}",
        f"-kernel id = {kernel_id}",
        f"-grid dim = ({len(blocks)},1,1)",
        f"-block dim = ({block_dim[0]},{block_dim[1]},{block_dim[2]})",
        f"-cuda stream id = {stream}",
    ]
    for b, warps in enumerate(blocks):
        lines.append("#BEGIN_TB")
        lines.append(f"-thread block = {b},0,0")
        for wid, instrs in enumerate(warps):
            lines.append(f"-warp = {wid}")
            for i in instrs:
                lines.append(f"{i.pc:04x} {i.active_mask:08x} "
                             f"{i.op.value}.{i.access_size} "
                             f"0x{i.base_addr:x} {i.stride}")
        lines.append("#END_TB")
    filename = filename or f"{name}.trace"
    (tmp_path / filename).write_text("\n".join(lines) + "\n")
    return filename


def write_commandlist(tmp_path, kernel_files):
    from streamsim.trace_model import parse_commandlist
    p = tmp_path / "kernelslist.g"
    p.write_text("".join(f"kernel,{f}\n" for f in kernel_files))
    return parse_commandlist(p)


# final-summary cell lines sit at line start; exit-time copies are indented
CELL_RE = re.compile(
    r"^(Total_core_cache_stats_breakdown|L2_cache_stats_breakdown)(_fail)?"
    r"\[stream=(\d+)\]\[(\w+)\]\[(\w+)\] = (\d+)$")
LEGACY_CELL_RE = re.compile(
    r"^(Total_core_cache_stats_breakdown|L2_cache_stats_breakdown)(_fail)?"
    r"\[(\w+)\]\[(\w+)\] = (\d+)$")
KTIME_RE = re.compile(
    r"^gpu_kernel_time\[stream=(\d+)\]\[uid=(\d+)\] = (\d+):(\d+)$")
FINISH_RE = re.compile(
    r"^kernel finished: name=(\S+) uid=(\d+) stream=(\d+) "
    r"start_cycle=(\d+) end_cycle=(\d+)$")
LAUNCH_RE = re.compile(
    r"^launching kernel name: (\S+) uid: (\d+) stream: (\d+) cycle: (\d+)$")


def summary_cells(log_text: str) -> dict[tuple, int]:
    """(scope, stream, type, outcome) -> count from line-start cell lines."""
    cells = {}
    for line in log_text.splitlines():
        m = CELL_RE.match(line)
        if not m:
            continue
        name, fail, stream, atype, outcome, count = m.groups()
        scope = "L1_total" if name.startswith("Total_core") else "L2"
        key = (scope, int(stream), atype, outcome)
        assert key not in cells, f"duplicate cell {key}"
        cells[key] = int(count)
    return cells


def finish_lines(log_text: str) -> list[dict]:
    out = []
    for line in log_text.splitlines():
        m = FINISH_RE.match(line)
        if m:
            out.append(dict(name=m.group(1), uid=int(m.group(2)),
                            stream=int(m.group(3)), start=int(m.group(4)),
                            end=int(m.group(5))))
    return out


def exit_blocks(log_text: str) -> list[tuple[dict, list[str]]]:
    """(finish line fields, indented lines of that exit block) pairs."""
    blocks = []
    current = None
    for line in log_text.splitlines():
        m = FINISH_RE.match(line)
        if m:
            current = (dict(name=m.group(1), uid=int(m.group(2)),
                            stream=int(m.group(3)), start=int(m.group(4)),
                            end=int(m.group(5))), [])
            blocks.append(current)
            continue
        if line.startswith("  ") and current is not None:
            current[1].append(line.strip())
        else:
            current = None
    return blocks
