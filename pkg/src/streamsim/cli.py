"""Command-line entry point: run simulations, query the oracle, and generate
the validation workloads.

Config files hold whitespace-separated ``-key value`` pairs with ``#``
comments; later files (and later occurrences) override earlier ones::

    -gpgpu_concurrent_kernel_sm 1
    -serialize_streams 0
    -stats_mode per_stream
    -num_sms 4  -issue_width 1  -max_blocks_per_sm 8
    -l1_sets 64 -l1_ways 4 -l1_line 128 -l1_mshr 32 -l1_merge 8
    -l1_missq 8 -l1_hit_lat 30
    -l2_sets 512 -l2_ways 16 -l2_line 128 -l2_mshr 128 -l2_merge 8
    -l2_missq 32 -l2_hit_lat 100
    -l2_miss_lat 200

Setting ``-gpgpu_concurrent_kernel_sm 0`` forces one kernel at a time, the
same gate as ``-serialize_streams 1``.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO

from .cache_hierarchy import CacheConfig
from .gpu_core import InternalError, SimConfig, Simulator
from .oracle import OracleReport, count_accesses, replay_lru
from .stream_stats import PerStreamCacheStats
from .trace_model import TraceError, gen_bench, gen_l2lat, parse_commandlist

CSV_HEADER = "record,scope,stream,type,outcome,count"

_INT_KEYS = {
    "num_sms", "issue_width", "max_blocks_per_sm", "l2_miss_lat",
    "l1_sets", "l1_ways", "l1_line", "l1_mshr", "l1_merge", "l1_missq",
    "l1_hit_lat",
    "l2_sets", "l2_ways", "l2_line", "l2_mshr", "l2_merge", "l2_missq",
    "l2_hit_lat",
}
_BOOL_KEYS = {"gpgpu_concurrent_kernel_sm", "serialize_streams"}
_ENUM_KEYS = {"stats_mode": ("per_stream", "legacy")}


class ConfigError(Exception):
    pass


@dataclass
class RunOptions:
    trace_path: Path
    config_paths: list[Path] = field(default_factory=list)
    stats_mode: str | None = None       # None: take the config value
    serialize_streams: bool = False     # True forces the serialized gate
    csv_out: Path | None = None
    log_out: Path | None = None         # None writes to stdout
    backend: str | None = None


def parse_config_files(paths: list[Path]) -> dict[str, object]:
    """Merge ``-key value`` pairs; the last occurrence of a key wins."""
    merged: dict[str, object] = {}
    for path in paths:
        tokens: list[str] = []
        for raw in Path(path).read_text().splitlines():
            line = raw.split("#", 1)[0]
            tokens.extend(line.split())
        i = 0
        while i < len(tokens):
            key = tokens[i]
            if not key.startswith("-"):
                raise ConfigError(f"{path}: expected -key, got {key!r}")
            if i + 1 >= len(tokens):
                raise ConfigError(f"{path}: missing value for {key}")
            name, value = key[1:], tokens[i + 1]
            i += 2
            if name in _BOOL_KEYS:
                if value not in ("0", "1"):
                    raise ConfigError(f"{path}: {key} expects 0 or 1, got {value!r}")
                merged[name] = value == "1"
            elif name in _INT_KEYS:
                try:
                    merged[name] = int(value)
                except ValueError:
                    raise ConfigError(f"{path}: {key} expects an integer, "
                                      f"got {value!r}") from None
            elif name in _ENUM_KEYS:
                if value not in _ENUM_KEYS[name]:
                    raise ConfigError(f"{path}: {key} expects one of "
                                      f"{_ENUM_KEYS[name]}, got {value!r}")
                merged[name] = value
            else:
                raise ConfigError(f"{path}: unknown config key {key}")
    return merged


def build_sim_config(cfg: dict[str, object]) -> SimConfig:
    def cache_config(prefix: str, base: CacheConfig) -> CacheConfig:
        return CacheConfig(
            num_sets=int(cfg.get(f"{prefix}_sets", base.num_sets)),
            num_ways=int(cfg.get(f"{prefix}_ways", base.num_ways)),
            line_size=int(cfg.get(f"{prefix}_line", base.line_size)),
            mshr_entries=int(cfg.get(f"{prefix}_mshr", base.mshr_entries)),
            mshr_max_merge=int(cfg.get(f"{prefix}_merge", base.mshr_max_merge)),
            miss_queue_depth=int(cfg.get(f"{prefix}_missq", base.miss_queue_depth)),
            hit_latency=int(cfg.get(f"{prefix}_hit_lat", base.hit_latency)),
            write_policy=base.write_policy,
        )

    try:
        return SimConfig(
            concurrent_kernel_sm=bool(cfg.get("gpgpu_concurrent_kernel_sm", True)),
            serialize_streams=bool(cfg.get("serialize_streams", False)),
            num_sms=int(cfg.get("num_sms", 4)),
            max_blocks_per_sm=int(cfg.get("max_blocks_per_sm", 8)),
            issue_width=int(cfg.get("issue_width", 1)),
            l1_config=cache_config("l1", CacheConfig.l1_default()),
            l2_config=cache_config("l2", CacheConfig.l2_default()),
            l2_miss_latency=int(cfg.get("l2_miss_lat", 200)),
        )
    except ValueError as e:
        raise ConfigError(str(e)) from None


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

def _stat_rows(scope: str, stats: PerStreamCacheStats) -> list[str]:
    rows = [f"stat,{scope},{stream},{t.name},{o.name},{v}"
            for stream, t, o, v in stats.nonzero_cells()]
    rows += [f"stat,{scope},{stream},{t.name},{f.name},{v}"
             for stream, t, f, v in stats.nonzero_fail_cells()]
    return rows


def export_csv(sim: Simulator, path: Path | IO[str]) -> None:
    """Write the run's final per-(scope, stream, type, outcome) cells and
    kernel time rows; cells match the log's final summary exactly."""
    lines = [CSV_HEADER]
    if sim.stats_mode == "per_stream":
        lines += _stat_rows("L1_total", sim.merged_l1_stats())
        lines += _stat_rows("L2", sim.l2.stats)
        for stream, uid, start, end in sim.time_table.entries():
            lines.append(f"ktime,{stream},{uid},{start},{end}")
    else:
        from .stream_stats import AccessOutcome, AccessType, FailOutcome
        for scope, agg in (("L1_total", sim.merged_l1_legacy()), ("L2", sim.l2.legacy)):
            for t in AccessType:
                for o in AccessOutcome:
                    v = agg.stats[t][o]
                    if v:
                        lines.append(f"stat,{scope},all,{t.name},{o.name},{v}")
            for t in AccessType:
                for f in FailOutcome:
                    v = agg.fail_stats[t][f]
                    if v:
                        lines.append(f"stat,{scope},all,{t.name},{f.name},{v}")
    text = "\n".join(lines) + "\n"
    if isinstance(path, (str, Path)):
        Path(path).write_text(text)
    else:
        path.write(text)


def oracle_csv(report: OracleReport, sink: IO[str]) -> None:
    sink.write(CSV_HEADER + "\n")
    for stream, level, atype in sorted(report.accesses):
        sink.write(f"stat,{level},{stream},{atype},ACCESS,"
                   f"{report.acc(stream, level, atype)}\n")
    if report.hits is not None:
        for label, table in (("HIT", report.hits), ("MISS", report.misses)):
            assert table is not None
            for stream, level, atype in sorted(table):
                sink.write(f"stat,{level},{stream},{atype},{label},"
                           f"{table[(stream, level, atype)]}\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def run_simulation(options: RunOptions) -> int:
    try:
        commands = parse_commandlist(options.trace_path)
        cfg = parse_config_files(options.config_paths)
    except (TraceError, ConfigError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    if options.serialize_streams:
        cfg["serialize_streams"] = True
    if options.stats_mode is not None:
        cfg["stats_mode"] = options.stats_mode
    stats_mode = str(cfg.get("stats_mode", "per_stream"))
    try:
        sim_config = build_sim_config(cfg)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    sink: IO[str]
    close = False
    if options.log_out is None:
        sink = sys.stdout
    else:
        sink = open(options.log_out, "w")
        close = True
    try:
        sim = Simulator(commands, sim_config, stats_mode=stats_mode,
                        log=sink, backend=options.backend)
        try:
            sim.run()
        except InternalError as e:
            print(f"internal error: {e}", file=sys.stderr)
            return 2
        if options.csv_out is not None:
            try:
                export_csv(sim, options.csv_out)
            except OSError as e:
                print(f"error: {e}", file=sys.stderr)
                return 1
    finally:
        if close:
            sink.close()
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    options = RunOptions(
        trace_path=Path(args.trace),
        config_paths=[Path(p) for p in args.config or []],
        stats_mode=args.stats_mode,
        serialize_streams=args.serialize_streams,
        csv_out=Path(args.csv) if args.csv else None,
        log_out=Path(args.log) if args.log else None,
        backend=args.backend,
    )
    return run_simulation(options)


def _cmd_oracle(args: argparse.Namespace) -> int:
    try:
        commands = parse_commandlist(Path(args.trace))
        cfg = parse_config_files([Path(p) for p in args.config or []])
        sim_config = build_sim_config(cfg)
    except (TraceError, ConfigError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    if args.replay:
        report = replay_lru(commands, l1_config=sim_config.l1_config,
                            l2_config=sim_config.l2_config)
    else:
        report = count_accesses(commands,
                                l1_line_size=sim_config.l1_config.line_size,
                                l2_line_size=sim_config.l2_config.line_size)
    if args.csv:
        with open(args.csv, "w") as f:
            oracle_csv(report, f)
    else:
        oracle_csv(report, sys.stdout)
    return 0


def _cmd_gen(args: argparse.Namespace) -> int:
    try:
        if args.workload == "l2lat":
            path = gen_l2lat(args.streams, args.threads, args.iters,
                             args.array_size, args.base_addr, args.out)
        else:
            path = gen_bench(args.workload, args.n, args.block_size, args.out,
                             base_x=args.base_x, base_y=args.base_y,
                             base_z=args.base_z, base_a=args.base_a)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(path)
    return 0


def _hex_int(value: str) -> int:
    return int(value, 0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="streamsim",
        description="Trace-driven multi-stream GPU cache simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="simulate a command list")
    run_p.add_argument("-trace", required=True, help="command list file")
    run_p.add_argument("-config", action="append",
                       help="config file (repeatable; later files override)")
    run_p.add_argument("--stats-mode", choices=("per_stream", "legacy"),
                       default=None)
    run_p.add_argument("--serialize-streams", action="store_true")
    run_p.add_argument("--csv", help="write final stats as CSV")
    run_p.add_argument("--log", help="log file (default: stdout)")
    run_p.add_argument("--backend", choices=("compiled", "pure"),
                       help="cache core backend (default: compiled if built)")
    run_p.set_defaults(func=_cmd_run)

    oracle_p = sub.add_parser("oracle", help="reference counts for a command list")
    oracle_p.add_argument("-trace", required=True)
    oracle_p.add_argument("-config", action="append")
    oracle_p.add_argument("--replay", action="store_true",
                          help="serialized LRU replay with hit/miss rows")
    oracle_p.add_argument("--csv", help="output file (default: stdout)")
    oracle_p.set_defaults(func=_cmd_oracle)

    gen_p = sub.add_parser("gen", help="generate a validation workload")
    gen_sub = gen_p.add_subparsers(dest="workload", required=True)

    l2lat_p = gen_sub.add_parser("l2lat")
    l2lat_p.add_argument("--out", required=True)
    l2lat_p.add_argument("--streams", type=int, default=4)
    l2lat_p.add_argument("--threads", type=int, default=1)
    l2lat_p.add_argument("--iters", type=int, default=1)
    l2lat_p.add_argument("--array-size", type=int, default=1)
    l2lat_p.add_argument("--base-addr", type=_hex_int, default=0x1000_0000)
    l2lat_p.set_defaults(func=_cmd_gen)

    for name, default_n, default_bs in (("bench1", 4096, 256),
                                        ("bench3", 1 << 18, 1024)):
        p = gen_sub.add_parser(name)
        p.add_argument("--out", required=True)
        p.add_argument("--n", type=int, default=default_n)
        p.add_argument("--block-size", type=int, default=default_bs)
        for arr in ("x", "y", "z", "a"):
            p.add_argument(f"--base-{arr}", type=_hex_int, default=None)
        p.set_defaults(func=_cmd_gen)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
