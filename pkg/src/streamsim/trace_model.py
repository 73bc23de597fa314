"""Command-list and kernel-trace file formats plus microbenchmark generators.

The command list drives a run, one command per line::

    MemcpyHtoD,0x10000000,8
    kernel,k1.trace

Kernel traces start with five header lines (name, id, grid dim, block dim,
cuda stream id) followed by one ``#BEGIN_TB``/``#END_TB`` section per thread
block; each section lists warps and their memory instructions.  The grammar is
a simplified, text-only format; it is not binary-compatible with any existing
tracer output.

The generators emit the two validation workloads used by the test suite: a
multi-stream pointer-chase kernel with a deterministic number of L2 accesses,
and a four-kernel saxpy/scale/add pipeline where one kernel runs on its own
stream.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

WARP_SIZE = 32
FULL_MASK = 0xFFFFFFFF


class TraceError(Exception):
    """Base class for command-list and kernel-trace errors."""


class UnknownCommand(TraceError):
    pass


class MalformedField(TraceError):
    pass


class MissingHeaderField(TraceError):
    pass


class BlockCountMismatch(TraceError):
    pass


class TraceSyntaxError(TraceError):
    def __init__(self, path: Path | str, line_no: int, message: str) -> None:
        super().__init__(f"{path}:{line_no}: {message}")
        self.line_no = line_no


class MemOp(Enum):
    LDG = "LDG"
    STG = "STG"
    LDG_CG = "LDG_CG"

    @property
    def is_store(self) -> bool:
        return self is MemOp.STG

    @property
    def l1_bypass(self) -> bool:
        # .cg loads cache at L2 and skip L1
        return self is MemOp.LDG_CG


@dataclass(frozen=True)
class TraceInstr:
    pc: int
    active_mask: int
    op: MemOp
    access_size: int  # bytes per lane, 4 or 8
    base_addr: int
    stride: int  # signed; lane i accesses base_addr + i*stride

    def lane_addrs(self) -> list[int]:
        return [self.base_addr + lane * self.stride
                for lane in range(WARP_SIZE) if self.active_mask >> lane & 1]


@dataclass(frozen=True)
class ThreadBlockTrace:
    block_coord: tuple[int, int, int]
    warps: tuple[tuple[int, tuple[TraceInstr, ...]], ...]  # (warp_id, instrs)


@dataclass
class KernelTrace:
    name: str
    kernel_id: int
    grid_dim: tuple[int, int, int]
    block_dim: tuple[int, int, int]
    cuda_stream_id: int
    blocks: tuple[ThreadBlockTrace, ...]

    @property
    def threads_per_block(self) -> int:
        x, y, z = self.block_dim
        return x * y * z

    @property
    def n_blocks(self) -> int:
        x, y, z = self.grid_dim
        return x * y * z

    def validate(self) -> None:
        if self.n_blocks != len(self.blocks):
            raise BlockCountMismatch(
                f"kernel {self.name!r}: grid declares {self.n_blocks} blocks, "
                f"trace has {len(self.blocks)}")
        if self.threads_per_block > 1024:
            raise TraceError(f"kernel {self.name!r}: block dim exceeds 1024 threads")
        expected_warps = -(-self.threads_per_block // WARP_SIZE)
        for block in self.blocks:
            if not block.warps:
                continue  # empty block is legal
            if len(block.warps) != expected_warps:
                raise TraceError(
                    f"kernel {self.name!r} block {block.block_coord}: "
                    f"{len(block.warps)} warps, expected {expected_warps}")
            prev = -1
            for wid, instrs in block.warps:
                if wid <= prev:
                    raise TraceError(
                        f"kernel {self.name!r} block {block.block_coord}: "
                        f"warp ids not strictly increasing")
                prev = wid
                if not instrs:
                    raise TraceError(
                        f"kernel {self.name!r} block {block.block_coord}: "
                        f"warp {wid} has no instructions in a non-empty block")
                for instr in instrs:
                    if instr.active_mask == 0:
                        raise TraceError(
                            f"kernel {self.name!r}: instruction with empty mask")
                    if instr.access_size not in (4, 8):
                        raise TraceError(
                            f"kernel {self.name!r}: bad access size {instr.access_size}")


@dataclass(frozen=True)
class MemcpyH2D:
    dest_addr: int
    size_bytes: int


@dataclass(frozen=True)
class KernelLaunch:
    trace_path: str        # as written in the command list
    resolved_path: Path    # resolved against the list's directory


Command = MemcpyH2D | KernelLaunch
CommandList = list


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_MEMCPY_RE = re.compile(r"^MemcpyHtoD,(0x[0-9a-fA-F]+),(\d+)$")
_KERNEL_RE = re.compile(r"^kernel,(\S+)$")


def parse_commandlist(path: str | Path) -> list[Command]:
    """Parse a command list; blank lines and ``#`` comments are skipped.

    Any other unrecognized line aborts with ``UnknownCommand`` ("Undefined
    Command"), matching the behavior of the launch loop this models.
    """
    path = Path(path)
    base = path.parent
    commands: list[Command] = []
    with open(path) as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            m = _MEMCPY_RE.match(line)
            if m:
                dest = int(m.group(1), 16)
                size = int(m.group(2))
                if size <= 0:
                    raise MalformedField(f"{path}:{line_no}: memcpy size must be > 0")
                if dest % 4:
                    raise MalformedField(
                        f"{path}:{line_no}: memcpy dest 0x{dest:x} not 4-byte aligned")
                commands.append(MemcpyH2D(dest, size))
                continue
            m = _KERNEL_RE.match(line)
            if m:
                rel = m.group(1)
                resolved = (base / rel).resolve()
                if not resolved.is_file():
                    raise MalformedField(
                        f"{path}:{line_no}: kernel trace {rel!r} is not a readable file")
                commands.append(KernelLaunch(rel, resolved))
                continue
            if line.startswith("MemcpyHtoD,") or line.startswith("kernel,"):
                raise MalformedField(f"{path}:{line_no}: malformed command {line!r}")
            raise UnknownCommand(f"{path}:{line_no}: Undefined Command: {line!r}")
    return commands


_HEADER_FIELDS = (
    ("-kernel name", "name"),
    ("-kernel id", "kernel_id"),
    ("-grid dim", "grid_dim"),
    ("-block dim", "block_dim"),
    ("-cuda stream id", "cuda_stream_id"),
)

_DIM_RE = re.compile(r"^\((\d+),(\d+),(\d+)\)$")
_INSTR_RE = re.compile(
    r"^([0-9a-fA-F]+)\s+([0-9a-fA-F]{8})\s+(LDG_CG|LDG|STG)\.([48])\s+"
    r"0x([0-9a-fA-F]+)\s+(-?\d+)$")


def _parse_dim(value: str, path: Path, line_no: int) -> tuple[int, int, int]:
    m = _DIM_RE.match(value.replace(" ", ""))
    if not m:
        raise TraceSyntaxError(path, line_no, f"bad dimension triple {value!r}")
    return int(m.group(1)), int(m.group(2)), int(m.group(3))


def parse_kernel_trace(path: str | Path) -> KernelTrace:
    """Parse one kernel trace file and validate all its invariants."""
    path = Path(path)
    with open(path) as f:
        lines = f.readlines()

    # header: five "-field = value" lines in fixed order
    header: dict[str, str] = {}
    idx = 0
    for field_label, field_name in _HEADER_FIELDS:
        while idx < len(lines) and not lines[idx].strip():
            idx += 1
        if idx >= len(lines):
            raise MissingHeaderField(f"{path}: missing header line {field_label!r}")
        line = lines[idx].strip()
        if "=" not in line or not line.startswith(field_label):
            raise MissingHeaderField(
                f"{path}:{idx + 1}: expected {field_label!r} header, got {line!r}")
        header[field_name] = line.split("=", 1)[1].strip()
        idx += 1

    try:
        kernel_id = int(header["kernel_id"])
        stream_id = int(header["cuda_stream_id"])
    except ValueError as e:
        raise MissingHeaderField(f"{path}: non-numeric header field: {e}") from None
    grid_dim = _parse_dim(header["grid_dim"], path, 0)
    block_dim = _parse_dim(header["block_dim"], path, 0)

    blocks: list[ThreadBlockTrace] = []
    coord: tuple[int, int, int] | None = None
    warps: list[tuple[int, tuple[TraceInstr, ...]]] = []
    cur_wid: int | None = None
    cur_instrs: list[TraceInstr] = []
    in_block = False

    def close_warp() -> None:
        nonlocal cur_wid, cur_instrs
        if cur_wid is not None:
            warps.append((cur_wid, tuple(cur_instrs)))
            cur_wid, cur_instrs = None, []

    for line_no in range(idx, len(lines)):
        line = lines[line_no].strip()
        n = line_no + 1
        if not line:
            continue
        if line == "#BEGIN_TB":
            if in_block:
                raise TraceSyntaxError(path, n, "nested #BEGIN_TB")
            in_block, coord, warps = True, None, []
            continue
        if line == "#END_TB":
            if not in_block:
                raise TraceSyntaxError(path, n, "#END_TB outside a block")
            close_warp()
            if coord is None:
                raise TraceSyntaxError(path, n, "block without '-thread block' line")
            blocks.append(ThreadBlockTrace(coord, tuple(warps)))
            in_block = False
            continue
        if not in_block:
            raise TraceSyntaxError(path, n, f"unexpected line outside block: {line!r}")
        if line.startswith("-thread block"):
            value = line.split("=", 1)[1].strip() if "=" in line else ""
            parts = value.split(",")
            if len(parts) != 3:
                raise TraceSyntaxError(path, n, f"bad thread block coord {value!r}")
            try:
                coord = (int(parts[0]), int(parts[1]), int(parts[2]))
            except ValueError:
                raise TraceSyntaxError(path, n, f"bad thread block coord {value!r}") from None
            continue
        if line.startswith("-warp"):
            close_warp()
            try:
                cur_wid = int(line.split("=", 1)[1].strip())
            except (IndexError, ValueError):
                raise TraceSyntaxError(path, n, f"bad warp line {line!r}") from None
            continue
        m = _INSTR_RE.match(line)
        if not m:
            raise TraceSyntaxError(path, n, f"bad instruction line {line!r}")
        if cur_wid is None:
            raise TraceSyntaxError(path, n, "instruction before any '-warp' line")
        cur_instrs.append(TraceInstr(
            pc=int(m.group(1), 16),
            active_mask=int(m.group(2), 16),
            op=MemOp(m.group(3)),
            access_size=int(m.group(4)),
            base_addr=int(m.group(5), 16),
            stride=int(m.group(6)),
        ))
    if in_block:
        raise TraceSyntaxError(path, len(lines), "unterminated #BEGIN_TB")

    trace = KernelTrace(
        name=header["name"],
        kernel_id=kernel_id,
        grid_dim=grid_dim,
        block_dim=block_dim,
        cuda_stream_id=stream_id,
        blocks=tuple(blocks),
    )
    trace.validate()
    return trace


def load_kernel_traces(commands: list) -> list[KernelTrace]:
    """Parse every kernel launch's trace, enforcing command-list-level
    invariants (kernel ids unique across the list)."""
    traces = []
    seen: dict[int, str] = {}
    for cmd in commands:
        if not isinstance(cmd, KernelLaunch):
            continue
        trace = parse_kernel_trace(cmd.resolved_path)
        if trace.kernel_id in seen:
            raise TraceError(
                f"kernel id {trace.kernel_id} used by both "
                f"{seen[trace.kernel_id]!r} and {cmd.trace_path!r}")
        seen[trace.kernel_id] = cmd.trace_path
        traces.append(trace)
    return traces


# ---------------------------------------------------------------------------
# writing
# ---------------------------------------------------------------------------

def format_kernel_trace(trace: KernelTrace) -> str:
    out = [
        f"-kernel name = {trace.name}",
        f"-kernel id = {trace.kernel_id}",
        f"-grid dim = ({trace.grid_dim[0]},{trace.grid_dim[1]},{trace.grid_dim[2]})",
        f"-block dim = ({trace.block_dim[0]},{trace.block_dim[1]},{trace.block_dim[2]})",
        f"-cuda stream id = {trace.cuda_stream_id}",
    ]
    for block in trace.blocks:
        out.append("#BEGIN_TB")
        x, y, z = block.block_coord
        out.append(f"-thread block = {x},{y},{z}")
        for wid, instrs in block.warps:
            out.append(f"-warp = {wid}")
            for i in instrs:
                out.append(f"{i.pc:04x} {i.active_mask:08x} {i.op.value}.{i.access_size} "
                           f"0x{i.base_addr:x} {i.stride}")
        out.append("#END_TB")
    return "\n".join(out) + "\n"


def _write_trace(out_dir: Path, filename: str, trace: KernelTrace) -> None:
    trace.validate()
    (out_dir / filename).write_text(format_kernel_trace(trace))


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def gen_l2lat(streams: int, threads_num: int, iters: int, array_size: int,
              base_addr: int, out_dir: str | Path) -> Path:
    """Generate the multi-stream pointer-chase workload.

    Emits one warming MemcpyHtoD plus one single-block kernel per stream
    (stream IDs 1..streams), all referencing the same chase array.  Each
    kernel writes the array with ``array_size`` lane-0 stores, then issues
    ``iters`` L1-bypassing chase loads by the first ``threads_num`` lanes.

    The original kernel also reads clock registers and writes a sink value;
    those accesses are not part of the documented loop bodies and are not
    generated.  For multi-lane configurations the chase is approximated by
    advancing the load base one element per iteration (lane i reads element
    (iter + i)); single-lane runs chase exactly.
    """
    if streams < 1:
        raise ValueError("streams must be >= 1")
    if array_size < 1:
        raise ValueError("array_size must be >= 1")
    if iters < 0:
        raise ValueError("iters must be >= 0")
    if not 1 <= threads_num <= WARP_SIZE:
        raise ValueError("threads_num must be in 1..32 (single-warp workload)")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    lines = [f"MemcpyHtoD,0x{base_addr:x},{array_size * 8}"]
    load_mask = (1 << threads_num) - 1
    for s in range(1, streams + 1):
        instrs = []
        pc = 0
        for i in range(array_size):
            # init loop: lane 0 stores the chase pointer for element i
            instrs.append(TraceInstr(pc, 0x1, MemOp.STG, 8, base_addr + 8 * i, 0))
            pc += 8
        for j in range(iters):
            base = base_addr + 8 * (j % array_size)
            instrs.append(TraceInstr(pc, load_mask, MemOp.LDG_CG, 8, base, 8))
            pc += 8
        trace = KernelTrace(
            name="l2_lat",
            kernel_id=s,
            grid_dim=(1, 1, 1),
            block_dim=(threads_num, 1, 1),
            cuda_stream_id=s,
            blocks=(ThreadBlockTrace((0, 0, 0), ((0, tuple(instrs)),)),),
        )
        filename = f"l2lat_s{s}.trace"
        _write_trace(out_dir, filename, trace)
        lines.append(f"kernel,{filename}")

    list_path = out_dir / "kernelslist.g"
    list_path.write_text("\n".join(lines) + "\n")
    return list_path


def _layout_regions(n: int, line_size: int, bases: tuple[int | None, ...],
                    first_default: int) -> list[int]:
    """Default array bases: disjoint line-aligned regions with a line of gap."""
    span = -(-n * 4 // line_size) * line_size + line_size
    out = []
    cursor = first_default
    for b in bases:
        out.append(cursor if b is None else b)
        cursor = out[-1] + span
    return out


def gen_bench(variant: str, n: int, block_size: int, out_dir: str | Path,
              base_x: int | None = None, base_y: int | None = None,
              base_z: int | None = None, base_a: int | None = None,
              line_size: int = 128) -> Path:
    """Generate the four-kernel saxpy/scale/add workload.

    Kernel order and streams: saxpy(x,y) on stream 0, scale(y) on stream 0,
    saxpy(x,z) on stream 1, add(y,a) on stream 0.  ``bench1`` uses 256-thread
    blocks, ``bench3`` 1024-thread blocks.
    """
    if variant not in ("bench1", "bench3"):
        raise ValueError(f"unknown variant {variant!r}")
    expected_bs = 256 if variant == "bench1" else 1024
    if block_size not in (256, 1024):
        raise ValueError("block_size must be 256 or 1024")
    if block_size != expected_bs:
        raise ValueError(f"{variant} uses {expected_bs}-thread blocks")
    if n % WARP_SIZE:
        raise ValueError("n must be a multiple of 32")
    # Every generated warp must carry instructions, so n may not leave a block
    # with fully inactive warps.
    if n > block_size and n % block_size:
        raise ValueError("n must be < block_size or a multiple of it")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    bx, by, bz, ba = _layout_regions(
        n, line_size, (base_x, base_y, base_z, base_a), 0x1000_0000)

    bdim = min(block_size, n)
    n_blocks = -(-n // bdim)
    warps_per_block = bdim // WARP_SIZE

    def warp_instrs(kind: str, block: int, warp: int, pc0: int) -> list[TraceInstr]:
        off = (block * bdim + warp * WARP_SIZE) * 4
        first_lane = block * bdim + warp * WARP_SIZE
        instrs = []
        pc = pc0
        if kind == "saxpy_y":
            seq = [(MemOp.LDG, bx, FULL_MASK), (MemOp.LDG, by, FULL_MASK),
                   (MemOp.STG, by, FULL_MASK)]
        elif kind == "scale_y":
            seq = [(MemOp.LDG, by, FULL_MASK), (MemOp.STG, by, FULL_MASK)]
        elif kind == "saxpy_z":
            seq = [(MemOp.LDG, bx, FULL_MASK), (MemOp.LDG, bz, FULL_MASK),
                   (MemOp.STG, bz, FULL_MASK)]
        elif kind == "add":
            # lanes with global index < n/2 also read the first operand array
            low = sum(1 << i for i in range(WARP_SIZE) if first_lane + i < n // 2)
            seq = []
            if low:
                seq.append((MemOp.LDG, by, low))
            seq += [(MemOp.LDG, ba, FULL_MASK), (MemOp.STG, ba, FULL_MASK)]
        else:
            raise AssertionError(kind)
        for op, base, mask in seq:
            instrs.append(TraceInstr(pc, mask, op, 4, base + off, 4))
            pc += 8
        return instrs

    kernels = [
        ("saxpy", "saxpy_y", 0),
        ("scale", "scale_y", 0),
        ("saxpy", "saxpy_z", 1),
        ("add", "add", 0),
    ]
    lines = []
    for kid, (name, kind, stream) in enumerate(kernels, start=1):
        blocks = []
        for b in range(n_blocks):
            warps = []
            pc = 0
            for w in range(warps_per_block):
                instrs = warp_instrs(kind, b, w, pc)
                pc += 8 * len(instrs)
                warps.append((w, tuple(instrs)))
            blocks.append(ThreadBlockTrace((b, 0, 0), tuple(warps)))
        trace = KernelTrace(
            name=name,
            kernel_id=kid,
            grid_dim=(n_blocks, 1, 1),
            block_dim=(bdim, 1, 1),
            cuda_stream_id=stream,
            blocks=tuple(blocks),
        )
        filename = f"{variant}_k{kid}_{name}.trace"
        _write_trace(out_dir, filename, trace)
        lines.append(f"kernel,{filename}")

    list_path = out_dir / "kernelslist.g"
    list_path.write_text("\n".join(lines) + "\n")
    return list_path
