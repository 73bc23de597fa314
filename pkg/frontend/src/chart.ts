/**
 * Chart data tables: pure reshapes of parsed runs.  Charts render these
 * tables verbatim, and `dumpRun` re-emits a parsed run in the simulator's
 * CSV schema, so every number in a chart is diffable against its source.
 */

import { CellMap, KernelInterval, ParsedRun, CSV_HEADER } from "./parse.js";

export const TYPES = ["GLOBAL_R", "GLOBAL_W"];
export const OUTCOMES = [
  "HIT", "HIT_RESERVED", "MISS", "RESERVATION_FAIL", "MSHR_HIT",
];
export const FAIL_OUTCOMES = [
  "LINE_ALLOC_FAIL", "MSHR_ENTRY_FAIL", "MSHR_MERGE_FAIL", "MISS_QUEUE_FULL",
];

const OUTCOME_ORDER = new Map(
  [...OUTCOMES, ...FAIL_OUTCOMES].map((name, i) => [name, i]));

export interface BarGroup {
  type: string;
  outcome: string;
  /** one value per run, in input order: counts summed over streams */
  values: number[];
}

export interface BarData {
  scope: string;
  runLabels: string[];
  groups: BarGroup[];
}

interface SplitKey {
  scope: string;
  stream: string;
  type: string;
  outcome: string;
}

function splitKey(key: string): SplitKey {
  const [scope, stream, type, outcome] = key.split(",");
  return { scope, stream, type, outcome };
}

/** Sum a run's cells over streams for one scope: "type,outcome" -> count. */
export function sumOverStreams(cells: CellMap, scope: string): Map<string, number> {
  const sums = new Map<string, number>();
  for (const [key, count] of cells) {
    const k = splitKey(key);
    if (k.scope !== scope) continue;
    const groupKey = `${k.type},${k.outcome}`;
    sums.set(groupKey, (sums.get(groupKey) ?? 0) + count);
  }
  return sums;
}

function groupOrder(a: string, b: string): number {
  const [ta, oa] = a.split(",");
  const [tb, ob] = b.split(",");
  if (ta !== tb) return TYPES.indexOf(ta) - TYPES.indexOf(tb);
  const ia = OUTCOME_ORDER.get(oa) ?? 99;
  const ib = OUTCOME_ORDER.get(ob) ?? 99;
  return ia !== ib ? ia - ib : oa.localeCompare(ob);
}

/** One bar group per (type, outcome) with a nonzero count in any run. */
export function barData(runs: ParsedRun[], scope: string): BarData {
  const perRun = runs.map((r) => sumOverStreams(r.cells, scope));
  const keys = new Set<string>();
  for (const sums of perRun) {
    for (const [key, count] of sums) {
      if (count !== 0) keys.add(key);
    }
  }
  const groups = [...keys].sort(groupOrder).map((key) => {
    const [type, outcome] = key.split(",");
    return { type, outcome, values: perRun.map((s) => s.get(key) ?? 0) };
  });
  return { scope, runLabels: runs.map((r) => r.label), groups };
}

export interface TimelineRow {
  stream: number;
  bars: KernelInterval[];
}

/** One row per stream (ascending), bars in launch (uid) order. */
export function timelineData(run: ParsedRun): TimelineRow[] {
  const byStream = new Map<number, KernelInterval[]>();
  for (const iv of run.intervals) {
    const bars = byStream.get(iv.stream) ?? [];
    bars.push(iv);
    byStream.set(iv.stream, bars);
  }
  return [...byStream.keys()].sort((a, b) => a - b).map((stream) => ({
    stream,
    bars: byStream.get(stream)!.slice().sort((a, b) => a.uid - b.uid),
  }));
}

function streamRank(stream: string): [number, number] {
  // numeric streams ascending, the legacy "all" label after them
  return stream === "all" ? [1, 0] : [0, Number(stream)];
}

function cellRank(key: string): (number | string)[] {
  const k = splitKey(key);
  const scope = k.scope === "L1_total" ? 0 : 1;
  const fail = FAIL_OUTCOMES.includes(k.outcome) ? 1 : 0;
  const [sa, sb] = streamRank(k.stream);
  return [scope, fail, sa, sb, TYPES.indexOf(k.type),
          OUTCOME_ORDER.get(k.outcome) ?? 99];
}

function compareRanks(a: (number | string)[], b: (number | string)[]): number {
  for (let i = 0; i < a.length; i++) {
    if (a[i] < b[i]) return -1;
    if (a[i] > b[i]) return 1;
  }
  return 0;
}

/**
 * Re-emit a parsed run in the simulator's CSV schema and row order, so a
 * dump of a parsed export reproduces the export.
 */
export function dumpRun(run: ParsedRun): string {
  const lines = [CSV_HEADER];
  const keys = [...run.cells.keys()].sort(
    (a, b) => compareRanks(cellRank(a), cellRank(b)));
  for (const key of keys) {
    lines.push(`stat,${key},${run.cells.get(key)}`);
  }
  const intervals = run.intervals.slice().sort(
    (a, b) => a.stream - b.stream || a.uid - b.uid);
  for (const iv of intervals) {
    lines.push(`ktime,${iv.stream},${iv.uid},${iv.start},${iv.end}`);
  }
  return lines.join("\n") + "\n";
}
