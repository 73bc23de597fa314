import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { ParseError, parseCsv, parseLog, parseText } from "../src/parse.js";

const FIXTURES = join(__dirname, "fixtures");

function fixture(name: string): string {
  return readFileSync(join(FIXTURES, name), "utf8");
}

const RUNS = ["l2lat_serialized", "l2lat_legacy", "l2lat_per_stream"];

describe("parseLog", () => {
  it("extracts cells and intervals from a per-stream log", () => {
    const run = parseLog(fixture("l2lat_per_stream.log"), "per_stream");
    expect(run.cells.get("L2,1,GLOBAL_W,MISS")).toBe(1);
    expect(run.cells.get("L2,2,GLOBAL_W,MSHR_HIT")).toBe(1);
    expect(run.intervals).toHaveLength(4);
    expect(run.intervals[0]).toEqual({ stream: 1, uid: 1, start: 0, end: 300 });
  });

  it("normalizes legacy stream-less cells to the all label", () => {
    const run = parseLog(fixture("l2lat_legacy.log"), "legacy");
    expect(run.cells.get("L1_total,all,GLOBAL_W,MISS")).toBe(4);
    expect(run.intervals).toHaveLength(0);
  });

  it("skips indented exit-time copies of the cells", () => {
    const text = fixture("l2lat_per_stream.log");
    expect(text).toMatch(/\n  L2_cache_stats_breakdown\[stream=/);
    expect(() => parseLog(text, "x")).not.toThrow();
  });

  it("reports duplicate cells with the line number", () => {
    const line = "L2_cache_stats_breakdown[stream=1][GLOBAL_R][HIT] = 3";
    expect(() => parseLog(`${line}\n${line}\n`, "dup", "dup.log"))
      .toThrow(/dup\.log:2: duplicate cell/);
  });

  it("reports malformed near-miss lines with the line number", () => {
    const bad = "ok\nL2_cache_stats_breakdown[stream=x][GLOBAL_R] = 3\n";
    expect(() => parseLog(bad, "bad", "bad.log")).toThrow(/bad\.log:2: malformed/);
  });

  it("ignores unrelated lines", () => {
    const run = parseLog("hello\nworld\n", "x");
    expect(run.cells.size).toBe(0);
  });
});

describe("parseCsv", () => {
  it("rejects a missing header", () => {
    expect(() => parseCsv("nope\n", "x", "x.csv")).toThrow(ParseError);
  });

  it("rejects unknown record kinds with the line number", () => {
    const text = "record,scope,stream,type,outcome,count\nbogus,1,2\n";
    expect(() => parseCsv(text, "x", "x.csv")).toThrow(/x\.csv:2: unknown record/);
  });

  it("rejects duplicate cells", () => {
    const row = "stat,L2,1,GLOBAL_R,HIT,3";
    const text = `record,scope,stream,type,outcome,count\n${row}\n${row}\n`;
    expect(() => parseCsv(text, "x", "x.csv")).toThrow(/duplicate cell/);
  });
});

describe("log/CSV agreement", () => {
  for (const name of RUNS) {
    it(`${name}: both formats yield identical cells and intervals`, () => {
      const fromLog = parseText(fixture(`${name}.log`), name);
      const fromCsv = parseText(fixture(`${name}.csv`), name);
      expect(Object.fromEntries(fromLog.cells))
        .toEqual(Object.fromEntries(fromCsv.cells));
      expect(fromLog.intervals).toEqual(fromCsv.intervals);
    });
  }
});
