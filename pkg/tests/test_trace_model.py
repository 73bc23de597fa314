import pytest

from streamsim.trace_model import (FULL_MASK, BlockCountMismatch, KernelLaunch,
                                   MalformedField, MemcpyH2D, MemOp,
                                   MissingHeaderField, TraceError,
                                   TraceSyntaxError, UnknownCommand, gen_bench,
                                   gen_l2lat, load_kernel_traces,
                                   parse_commandlist, parse_kernel_trace)

MINIMAL_TRACE = """\
-kernel name = k
-kernel id = 1
-grid dim = (1,1,1)
-block dim = (32,1,1)
-cuda stream id = 3
#BEGIN_TB
-thread block = 0,0,0
-warp = 0
0000 ffffffff LDG.4 0x10000000 4
#END_TB
"""


def write_trace(tmp_path, text, name="k.trace"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestCommandList:
    def test_memcpy_line(self, tmp_path):
        p = tmp_path / "cl.g"
        p.write_text("MemcpyHtoD,0x10000000,8\n")
        cmds = parse_commandlist(p)
        assert cmds == [MemcpyH2D(0x10000000, 8)]

    def test_kernel_line(self, tmp_path):
        write_trace(tmp_path, MINIMAL_TRACE, "k1.trace")
        p = tmp_path / "cl.g"
        p.write_text("kernel,k1.trace\n")
        (cmd,) = parse_commandlist(p)
        assert isinstance(cmd, KernelLaunch)
        assert cmd.trace_path == "k1.trace"
        assert cmd.resolved_path.is_file()

    def test_unknown_command_aborts(self, tmp_path):
        p = tmp_path / "cl.g"
        p.write_text("Foo,bar\n")
        with pytest.raises(UnknownCommand, match="Undefined Command"):
            parse_commandlist(p)

    def test_comments_and_blanks_skipped(self, tmp_path):
        p = tmp_path / "cl.g"
        p.write_text("# header\n\nMemcpyHtoD,0x1000,4\n\n# tail\n")
        assert len(parse_commandlist(p)) == 1

    def test_zero_size_memcpy_rejected(self, tmp_path):
        p = tmp_path / "cl.g"
        p.write_text("MemcpyHtoD,0x1000,0\n")
        with pytest.raises(MalformedField):
            parse_commandlist(p)

    def test_unaligned_memcpy_rejected(self, tmp_path):
        p = tmp_path / "cl.g"
        p.write_text("MemcpyHtoD,0x1001,8\n")
        with pytest.raises(MalformedField):
            parse_commandlist(p)

    def test_missing_trace_file_rejected(self, tmp_path):
        p = tmp_path / "cl.g"
        p.write_text("kernel,nosuch.trace\n")
        with pytest.raises(MalformedField):
            parse_commandlist(p)

    def test_duplicate_kernel_ids_rejected(self, tmp_path):
        write_trace(tmp_path, MINIMAL_TRACE, "a.trace")
        write_trace(tmp_path, MINIMAL_TRACE.replace("-kernel name = k",
                                                    "-kernel name = k2"),
                    "b.trace")
        p = tmp_path / "cl.g"
        p.write_text("kernel,a.trace\nkernel,b.trace\n")
        with pytest.raises(TraceError, match="kernel id 1 used by both"):
            load_kernel_traces(parse_commandlist(p))


class TestKernelTraceParser:
    def test_minimal_trace(self, tmp_path):
        trace = parse_kernel_trace(write_trace(tmp_path, MINIMAL_TRACE))
        assert trace.name == "k"
        assert trace.grid_dim == (1, 1, 1)
        assert len(trace.blocks) == 1
        (wid, instrs), = trace.blocks[0].warps
        assert wid == 0
        assert instrs[0].op is MemOp.LDG
        assert instrs[0].base_addr == 0x10000000

    def test_stream_id_passthrough(self, tmp_path):
        trace = parse_kernel_trace(write_trace(tmp_path, MINIMAL_TRACE))
        assert trace.cuda_stream_id == 3

    def test_block_count_mismatch(self, tmp_path):
        text = MINIMAL_TRACE.replace("-grid dim = (1,1,1)", "-grid dim = (2,1,1)")
        with pytest.raises(BlockCountMismatch):
            parse_kernel_trace(write_trace(tmp_path, text))

    def test_each_missing_header_line_rejected(self, tmp_path):
        lines = MINIMAL_TRACE.splitlines()
        for i in range(5):
            mutated = "\n".join(lines[:i] + lines[i + 1:]) + "\n"
            with pytest.raises((MissingHeaderField, TraceSyntaxError)):
                parse_kernel_trace(write_trace(tmp_path, mutated, f"m{i}.trace"))

    def test_bad_instruction_line(self, tmp_path):
        text = MINIMAL_TRACE.replace("0000 ffffffff LDG.4 0x10000000 4",
                                     "0000 ffffffff LDX.4 0x10000000 4")
        with pytest.raises(TraceSyntaxError):
            parse_kernel_trace(write_trace(tmp_path, text))

    def test_zero_mask_rejected(self, tmp_path):
        text = MINIMAL_TRACE.replace("ffffffff", "00000000")
        with pytest.raises(TraceError):
            parse_kernel_trace(write_trace(tmp_path, text))

    def test_warp_ids_strictly_increasing(self, tmp_path):
        text = MINIMAL_TRACE.replace(
            "-block dim = (32,1,1)", "-block dim = (64,1,1)").replace(
            "#END_TB",
            "-warp = 0\n0008 ffffffff LDG.4 0x10000100 4\n#END_TB")
        with pytest.raises(TraceError):
            parse_kernel_trace(write_trace(tmp_path, text))

    def test_warp_count_must_match_block_dim(self, tmp_path):
        text = MINIMAL_TRACE.replace("-block dim = (32,1,1)",
                                     "-block dim = (64,1,1)")
        with pytest.raises(TraceError):
            parse_kernel_trace(write_trace(tmp_path, text))

    def test_block_dim_capped_at_1024_threads(self, tmp_path):
        text = MINIMAL_TRACE.replace("-block dim = (32,1,1)",
                                     "-block dim = (2048,1,1)")
        with pytest.raises(TraceError):
            parse_kernel_trace(write_trace(tmp_path, text))


class TestGenL2lat:
    def test_paper_configuration(self, tmp_path):
        # THREADS_NUM 1, ITERS 1, ARRAY_SIZE 1, four streams
        path = gen_l2lat(4, 1, 1, 1, 0x10000000, tmp_path)
        cmds = parse_commandlist(path)
        assert isinstance(cmds[0], MemcpyH2D)
        kernels = [parse_kernel_trace(c.resolved_path)
                   for c in cmds if isinstance(c, KernelLaunch)]
        assert len(kernels) == 4
        assert sorted(k.cuda_stream_id for k in kernels) == [1, 2, 3, 4]
        for k in kernels:
            (_, instrs), = k.blocks[0].warps
            ops = [i.op for i in instrs]
            assert ops == [MemOp.STG, MemOp.LDG_CG]
            assert all(i.base_addr == 0x10000000 for i in instrs)
            assert instrs[0].active_mask == 0x1

    def test_init_loop_store_count(self, tmp_path):
        # array_size 4: three loop stores plus the closing store, then the load
        path = gen_l2lat(1, 1, 1, 4, 0x10000000, tmp_path)
        cmds = parse_commandlist(path)
        trace = parse_kernel_trace(cmds[-1].resolved_path)
        (_, instrs), = trace.blocks[0].warps
        assert [i.op for i in instrs] == [MemOp.STG] * 4 + [MemOp.LDG_CG]
        assert [i.base_addr for i in instrs[:4]] == [
            0x10000000 + 8 * i for i in range(4)]

    def test_zero_streams_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            gen_l2lat(0, 1, 1, 1, 0x10000000, tmp_path)

    def test_multi_warp_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            gen_l2lat(1, 33, 1, 1, 0x10000000, tmp_path)

    @pytest.mark.parametrize("streams,threads,iters,array_size",
                             [(1, 1, 1, 1), (4, 1, 1, 1), (2, 4, 3, 5),
                              (1, 32, 2, 2), (3, 1, 8, 1)])
    def test_roundtrip_and_instr_count(self, tmp_path, streams, threads,
                                       iters, array_size):
        path = gen_l2lat(streams, threads, iters, array_size, 0x2000_0000,
                         tmp_path / f"{streams}_{threads}_{iters}_{array_size}")
        cmds = parse_commandlist(path)
        kernels = [parse_kernel_trace(c.resolved_path)
                   for c in cmds if isinstance(c, KernelLaunch)]
        assert len({k.cuda_stream_id for k in kernels}) == streams
        total = sum(len(instrs) for k in kernels
                    for b in k.blocks for _, instrs in b.warps)
        assert total == streams * (array_size + iters)


class TestGenBench:
    def test_bench3_paper_shape(self, tmp_path):
        path = gen_bench("bench3", 1 << 18, 1024, tmp_path)
        cmds = parse_commandlist(path)
        kernels = [parse_kernel_trace(c.resolved_path) for c in cmds]
        assert len(kernels) == 4
        assert all(k.grid_dim == (256, 1, 1) for k in kernels)
        assert [k.cuda_stream_id for k in kernels] == [0, 0, 1, 0]
        assert [k.name for k in kernels] == ["saxpy", "scale", "saxpy", "add"]

    def test_bench1_grid(self, tmp_path):
        path = gen_bench("bench1", 4096, 256, tmp_path)
        kernels = [parse_kernel_trace(c.resolved_path)
                   for c in parse_commandlist(path)]
        assert all(k.grid_dim == (16, 1, 1) for k in kernels)

    def test_add_kernel_predicate_split(self, tmp_path):
        # n=64: lanes 0..31 sit below n/2 and do 3 accesses, lanes 32..63 do 2
        path = gen_bench("bench1", 64, 256, tmp_path)
        kernels = [parse_kernel_trace(c.resolved_path)
                   for c in parse_commandlist(path)]
        add = kernels[3]
        assert add.name == "add"
        (block,) = add.blocks
        (w0, instrs0), (w1, instrs1) = block.warps
        assert len(instrs0) == 3 and instrs0[0].active_mask == FULL_MASK
        assert len(instrs1) == 2
        assert all(i.active_mask == FULL_MASK for i in instrs1)

    def test_add_kernel_half_warp_mask(self, tmp_path):
        # n=96: n/2 = 48 splits warp 1, so its extra load is half-masked
        path = gen_bench("bench1", 96, 256, tmp_path)
        kernels = [parse_kernel_trace(c.resolved_path)
                   for c in parse_commandlist(path)]
        (block,) = kernels[3].blocks
        _, instrs1 = block.warps[1]
        assert len(instrs1) == 3
        assert instrs1[0].active_mask == 0x0000FFFF

    def test_stream_assignment(self, tmp_path):
        path = gen_bench("bench1", 4096, 256, tmp_path)
        kernels = [parse_kernel_trace(c.resolved_path)
                   for c in parse_commandlist(path)]
        streams = [k.cuda_stream_id for k in kernels]
        assert sorted(set(streams)) == [0, 1]
        assert streams[2] == 1 and streams.count(1) == 1

    def test_disjoint_default_regions(self, tmp_path):
        path = gen_bench("bench1", 4096, 256, tmp_path)
        kernels = [parse_kernel_trace(c.resolved_path)
                   for c in parse_commandlist(path)]
        spans = []
        for k in kernels:
            addrs = [i.base_addr for b in k.blocks
                     for _, instrs in b.warps for i in instrs]
            spans.append((min(addrs), max(addrs)))
        bases = set()
        for k in kernels:
            for b in k.blocks:
                for _, instrs in b.warps:
                    for i in instrs:
                        bases.add(i.base_addr - i.base_addr % (4096 * 4))
        # x, y, z, a regions are distinct and line-aligned
        assert len(bases) >= 4
        assert all(b % 128 == 0 for b in bases)

    def test_bad_sizes_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            gen_bench("bench1", 100, 256, tmp_path)  # not a multiple of 32
        with pytest.raises(ValueError):
            gen_bench("bench1", 288, 256, tmp_path)  # leaves inactive warps
        with pytest.raises(ValueError):
            gen_bench("bench2", 4096, 256, tmp_path)
        with pytest.raises(ValueError):
            gen_bench("bench1", 4096, 1024, tmp_path)

    @pytest.mark.parametrize("variant,n,bs", [("bench1", 64, 256),
                                              ("bench1", 4096, 256),
                                              ("bench3", 1 << 14, 1024)])
    def test_roundtrip(self, tmp_path, variant, n, bs):
        path = gen_bench(variant, n, bs, tmp_path / f"{variant}_{n}")
        kernels = [parse_kernel_trace(c.resolved_path)
                   for c in parse_commandlist(path)]
        for k in kernels:
            k.validate()
