/**
 * Parsers for the simulator's two output formats.
 *
 * Logs carry one parseable copy of each statistic cell at line start in the
 * final summary (exit-time copies are indented and skipped); CSV exports
 * carry the same cells as `stat` rows plus kernel intervals as `ktime` rows.
 * Stream-oblivious (legacy) log lines have no stream key and are normalized
 * to the stream label "all", matching the CSV's encoding.
 */

export const CSV_HEADER = "record,scope,stream,type,outcome,count";

export interface KernelInterval {
  stream: number;
  uid: number;
  start: number;
  end: number;
}

/** Cell key "scope,stream,type,outcome"; stream is a number or "all". */
export type CellMap = Map<string, number>;

export interface ParsedRun {
  label: string;
  cells: CellMap;
  intervals: KernelInterval[];
}

export class ParseError extends Error {
  constructor(file: string, lineNo: number, message: string) {
    super(`${file}:${lineNo}: ${message}`);
    this.name = "ParseError";
  }
}

export function cellKey(scope: string, stream: string, type: string,
                        outcome: string): string {
  return `${scope},${stream},${type},${outcome}`;
}

const SCOPE_BY_NAME: Record<string, string> = {
  Total_core_cache_stats_breakdown: "L1_total",
  L2_cache_stats_breakdown: "L2",
};

const STREAM_CELL_RE =
  /^(Total_core_cache_stats_breakdown|L2_cache_stats_breakdown)(_fail)?\[stream=(\d+)\]\[(\w+)\]\[(\w+)\] = (\d+)$/;
const LEGACY_CELL_RE =
  /^(Total_core_cache_stats_breakdown|L2_cache_stats_breakdown)(_fail)?\[(\w+)\]\[(\w+)\] = (\d+)$/;
const KTIME_RE = /^gpu_kernel_time\[stream=(\d+)\]\[uid=(\d+)\] = (\d+):(\d+)$/;

function addCell(cells: CellMap, key: string, count: number, file: string,
                 lineNo: number): void {
  if (cells.has(key)) {
    throw new ParseError(file, lineNo, `duplicate cell ${key}`);
  }
  cells.set(key, count);
}

export function parseLog(text: string, label: string, file = label): ParsedRun {
  const cells: CellMap = new Map();
  const intervals: KernelInterval[] = [];
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i];
    const lineNo = i + 1;
    let m = STREAM_CELL_RE.exec(line);
    if (m) {
      const key = cellKey(SCOPE_BY_NAME[m[1]], m[3], m[4], m[5]);
      addCell(cells, key, Number(m[6]), file, lineNo);
      continue;
    }
    m = LEGACY_CELL_RE.exec(line);
    if (m) {
      const key = cellKey(SCOPE_BY_NAME[m[1]], "all", m[3], m[4]);
      addCell(cells, key, Number(m[5]), file, lineNo);
      continue;
    }
    m = KTIME_RE.exec(line);
    if (m) {
      intervals.push({
        stream: Number(m[1]),
        uid: Number(m[2]),
        start: Number(m[3]),
        end: Number(m[4]),
      });
      continue;
    }
    // a line that starts like a cell but does not parse is malformed, not
    // "unrelated"
    if (/^(Total_core_cache_stats_breakdown|L2_cache_stats_breakdown|gpu_kernel_time)/.test(line)) {
      throw new ParseError(file, lineNo, `malformed line: ${line}`);
    }
  }
  return { label, cells, intervals };
}

export function parseCsv(text: string, label: string, file = label): ParsedRun {
  const lines = text.split("\n");
  if (lines[0] !== CSV_HEADER) {
    throw new ParseError(file, 1, `expected header ${CSV_HEADER}`);
  }
  const cells: CellMap = new Map();
  const intervals: KernelInterval[] = [];
  for (let i = 1; i < lines.length; i++) {
    const line = lines[i];
    if (!line) continue;
    const parts = line.split(",");
    const lineNo = i + 1;
    if (parts[0] === "stat") {
      if (parts.length !== 6) {
        throw new ParseError(file, lineNo, `stat row needs 6 fields: ${line}`);
      }
      const count = Number(parts[5]);
      if (!Number.isInteger(count)) {
        throw new ParseError(file, lineNo, `bad count: ${line}`);
      }
      addCell(cells, cellKey(parts[1], parts[2], parts[3], parts[4]), count,
              file, lineNo);
    } else if (parts[0] === "ktime") {
      if (parts.length !== 5) {
        throw new ParseError(file, lineNo, `ktime row needs 5 fields: ${line}`);
      }
      intervals.push({
        stream: Number(parts[1]),
        uid: Number(parts[2]),
        start: Number(parts[3]),
        end: Number(parts[4]),
      });
    } else {
      throw new ParseError(file, lineNo, `unknown record kind: ${line}`);
    }
  }
  return { label, cells, intervals };
}

/** Auto-detect by header: CSV exports start with the exact header row. */
export function parseText(text: string, label: string, file = label): ParsedRun {
  if (text.startsWith(CSV_HEADER + "\n") || text.trim() === CSV_HEADER) {
    return parseCsv(text, label, file);
  }
  return parseLog(text, label, file);
}
