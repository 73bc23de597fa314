#!/usr/bin/env node
/**
 * plot <log|csv>... [--scope L2|L1_total] [--out prefix] [--dump]
 *
 * Reads simulator logs and/or CSV exports, writes one grouped-bar chart
 * comparing all inputs plus a kernel timeline per input, and with --dump
 * also re-emits each parsed run as CSV for diffing against its source.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { barData, dumpRun, timelineData } from "./chart.js";
import { ParsedRun, parseText } from "./parse.js";
import { renderBarChart, renderTimeline } from "./svg.js";

interface Options {
  files: string[];
  scope: string;
  out: string;
  dump: boolean;
}

export function parseArgs(argv: string[]): Options {
  const options: Options = { files: [], scope: "L2", out: "plot_", dump: false };
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "--scope") {
      const value = argv[++i];
      if (value !== "L2" && value !== "L1_total") {
        throw new Error(`--scope must be L2 or L1_total, got ${value}`);
      }
      options.scope = value;
    } else if (arg === "--out") {
      options.out = argv[++i];
      if (options.out === undefined) throw new Error("--out needs a value");
    } else if (arg === "--dump") {
      options.dump = true;
    } else if (arg.startsWith("--")) {
      throw new Error(`unknown option ${arg}`);
    } else {
      options.files.push(arg);
    }
  }
  if (options.files.length === 0) {
    throw new Error("usage: plot <log|csv>... [--scope L2|L1_total] [--out prefix] [--dump]");
  }
  return options;
}

function labelOf(file: string): string {
  return path.basename(file).replace(/\.(log|csv|txt)$/, "");
}

export function main(argv: string[]): number {
  let options: Options;
  try {
    options = parseArgs(argv);
  } catch (e) {
    console.error((e as Error).message);
    return 2;
  }
  const runs: ParsedRun[] = [];
  for (const file of options.files) {
    try {
      const text = fs.readFileSync(file, "utf8");
      runs.push(parseText(text, labelOf(file), file));
    } catch (e) {
      console.error((e as Error).message);
      return 1;
    }
  }

  const bars = barData(runs, options.scope);
  const barPath = `${options.out}bars_${options.scope}.svg`;
  fs.writeFileSync(barPath, renderBarChart(bars));
  console.log(barPath);

  for (const run of runs) {
    if (run.intervals.length > 0) {
      const tlPath = `${options.out}timeline_${run.label}.svg`;
      fs.writeFileSync(tlPath, renderTimeline(timelineData(run), run.label));
      console.log(tlPath);
    }
    if (options.dump) {
      const dumpPath = `${options.out}dump_${run.label}.csv`;
      fs.writeFileSync(dumpPath, dumpRun(run));
      console.log(dumpPath);
    }
  }
  return 0;
}

const isDirectRun = process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${path.resolve(process.argv[1])}`).href;
if (isDirectRun) {
  process.exit(main(process.argv.slice(2)));
}
