/**
 * Minimal dependency-free SVG renderers.  Only the data tables in chart.ts
 * are contractual; these renderers are plain views over them.
 */

import { BarData, TimelineRow } from "./chart.js";

const PALETTE = [
  "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1",
  "#76b7b2", "#edc948", "#ff9da7", "#9c755f", "#bab0ac",
];

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function renderBarChart(data: BarData, title = ""): string {
  const barW = 18;
  const groupGap = 24;
  const left = 70;
  const bottom = 110;
  const top = 40;
  const height = 360;
  const plotH = height - top - bottom;
  const nRuns = Math.max(data.runLabels.length, 1);
  const groupW = nRuns * barW + groupGap;
  const width = Math.max(left + data.groups.length * groupW + 40, 320);
  const maxVal = Math.max(1, ...data.groups.flatMap((g) => g.values));

  const parts: string[] = [];
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" font-family="sans-serif" font-size="11">`);
  parts.push(`<text x="${left}" y="18" font-size="14">${esc(title || `cache stats by (type, outcome) - ${data.scope}`)}</text>`);
  // y axis with four gridlines
  for (let i = 0; i <= 4; i++) {
    const v = (maxVal * i) / 4;
    const y = top + plotH - (plotH * i) / 4;
    parts.push(`<line x1="${left}" y1="${y}" x2="${width - 20}" y2="${y}" stroke="#ddd"/>`);
    parts.push(`<text x="${left - 6}" y="${y + 4}" text-anchor="end">${Math.round(v)}</text>`);
  }
  data.groups.forEach((group, gi) => {
    const x0 = left + gi * groupW;
    group.values.forEach((v, ri) => {
      const h = (v / maxVal) * plotH;
      const x = x0 + ri * barW;
      const y = top + plotH - h;
      parts.push(`<rect class="bar" x="${x}" y="${y}" width="${barW - 2}" height="${h}" fill="${PALETTE[ri % PALETTE.length]}"><title>${esc(data.runLabels[ri])} ${esc(group.type)}/${esc(group.outcome)}: ${v}</title></rect>`);
    });
    const lx = x0 + (nRuns * barW) / 2;
    const ly = top + plotH + 12;
    parts.push(`<text x="${lx}" y="${ly}" text-anchor="end" transform="rotate(-45 ${lx} ${ly})">${esc(`${group.type}/${group.outcome}`)}</text>`);
  });
  data.runLabels.forEach((label, ri) => {
    const y = 14 + ri * 16;
    parts.push(`<rect x="${width - 170}" y="${y - 10}" width="12" height="12" fill="${PALETTE[ri % PALETTE.length]}"/>`);
    parts.push(`<text x="${width - 152}" y="${y}">${esc(label)}</text>`);
  });
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}

export function renderTimeline(rows: TimelineRow[], label = ""): string {
  const left = 90;
  const rowH = 34;
  const top = 40;
  const width = 860;
  const plotW = width - left - 30;
  const height = top + Math.max(rows.length, 1) * rowH + 50;
  const maxCycle = Math.max(1, ...rows.flatMap((r) => r.bars.map((b) => b.end)));

  const parts: string[] = [];
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" font-family="sans-serif" font-size="11">`);
  parts.push(`<text x="${left}" y="18" font-size="14">${esc(`kernel timeline - ${label}`)}</text>`);
  for (let i = 0; i <= 4; i++) {
    const c = Math.round((maxCycle * i) / 4);
    const x = left + (plotW * i) / 4;
    parts.push(`<line x1="${x}" y1="${top}" x2="${x}" y2="${height - 40}" stroke="#eee"/>`);
    parts.push(`<text x="${x}" y="${height - 24}" text-anchor="middle">${c}</text>`);
  }
  parts.push(`<text x="${left + plotW / 2}" y="${height - 8}" text-anchor="middle">cycles</text>`);
  rows.forEach((row, ri) => {
    const y = top + ri * rowH;
    parts.push(`<text x="${left - 8}" y="${y + 18}" text-anchor="end">stream ${row.stream}</text>`);
    for (const bar of row.bars) {
      const x = left + (bar.start / maxCycle) * plotW;
      const w = Math.max(1, ((bar.end - bar.start) / maxCycle) * plotW);
      const color = PALETTE[(bar.uid - 1) % PALETTE.length];
      parts.push(`<rect class="kernel" x="${x}" y="${y + 4}" width="${w}" height="${rowH - 12}" fill="${color}"><title>uid ${bar.uid}: ${bar.start}-${bar.end}</title></rect>`);
    }
  });
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
