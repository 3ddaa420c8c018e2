// Chart geometry shared by the SVG renderer (screen) and the rasterizer
// (PNG export), so exported images match what is on screen.

import { escapeHtml } from "./format.js";
import type { DeltaPayload, PrCurvePayload, ProjectionPayload, TokenFrequenciesPayload } from "./types.js";

export type RGB = [number, number, number];

export const PALETTE: RGB[] = [
  [31, 119, 180],
  [214, 39, 40],
  [44, 160, 44],
  [148, 103, 189],
  [255, 127, 14],
  [140, 86, 75],
];

function cssColor([r, g, b]: RGB): string {
  return `rgb(${r},${g},${b})`;
}

export interface LineSeries {
  label: string;
  xs: number[]; // data space [0,1]
  ys: number[];
  color: RGB;
}

export interface LineChartData {
  width: number;
  height: number;
  pad: number;
  xLabel: string;
  yLabel: string;
  series: LineSeries[];
}

export function prCurveChartData(payloads: PrCurvePayload[], width = 460, height = 300): LineChartData {
  return {
    width,
    height,
    pad: 40,
    xLabel: "recall",
    yLabel: "precision",
    series: payloads.map((p, i) => ({
      label: p.run_id,
      xs: p.recall_levels,
      ys: p.average,
      color: PALETTE[i % PALETTE.length],
    })),
  };
}

/** Data-space [0,1] x [0,1] to pixel coordinates. */
export function toPixel(data: LineChartData, x: number, y: number): [number, number] {
  const plotW = data.width - 2 * data.pad;
  const plotH = data.height - 2 * data.pad;
  return [data.pad + x * plotW, data.height - data.pad - y * plotH];
}

export function lineChartSVG(data: LineChartData): string {
  const parts: string[] = [
    `<svg width="${data.width}" height="${data.height}" viewBox="0 0 ${data.width} ${data.height}" role="img">`,
  ];
  const [x0, y0] = toPixel(data, 0, 0);
  const [x1, y1] = toPixel(data, 1, 1);
  for (let i = 0; i <= 10; i++) {
    const [gx, gy] = toPixel(data, i / 10, i / 10);
    parts.push(`<line x1="${gx.toFixed(1)}" y1="${y0}" x2="${gx.toFixed(1)}" y2="${y1}" stroke="#eee"/>`);
    parts.push(`<line x1="${x0}" y1="${gy.toFixed(1)}" x2="${x1}" y2="${gy.toFixed(1)}" stroke="#eee"/>`);
  }
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${x1}" y2="${y0}" stroke="#333"/>`);
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${x0}" y2="${y1}" stroke="#333"/>`);
  for (let i = 0; i <= 10; i += 2) {
    const [tx, ty] = toPixel(data, i / 10, i / 10);
    parts.push(
      `<text x="${tx.toFixed(1)}" y="${data.height - data.pad + 14}" font-size="10" text-anchor="middle">${(i / 10).toFixed(1)}</text>`,
    );
    parts.push(
      `<text x="${data.pad - 5}" y="${ty.toFixed(1)}" font-size="10" text-anchor="end" dominant-baseline="middle">${(i / 10).toFixed(1)}</text>`,
    );
  }
  parts.push(
    `<text x="${data.width / 2}" y="${data.height - 4}" font-size="11" text-anchor="middle">${escapeHtml(data.xLabel)}</text>`,
  );
  data.series.forEach((s, idx) => {
    const points = s.xs.map((x, i) => toPixel(data, x, s.ys[i]).map((v) => v.toFixed(1)).join(",")).join(" ");
    parts.push(`<polyline fill="none" stroke="${cssColor(s.color)}" stroke-width="2" points="${points}"/>`);
    parts.push(
      `<text x="${data.width - data.pad + 4}" y="${data.pad + 12 * idx + 8}" font-size="10" fill="${cssColor(s.color)}">${escapeHtml(s.label)}</text>`,
    );
  });
  parts.push("</svg>");
  return parts.join("");
}

export function projectionScatterSVG(payload: ProjectionPayload, width = 460, height = 300): string {
  const xs = payload.coordinates.map((c) => c[0]);
  const ys = payload.coordinates.map((c) => c[1] ?? 0);
  const pad = 40;
  const xLo = Math.min(...xs);
  const xHi = Math.max(...xs);
  const yLo = Math.min(...ys);
  const yHi = Math.max(...ys);
  const xSpan = xHi - xLo || 1;
  const ySpan = yHi - yLo || 1;
  const parts = [`<svg width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" role="img">`];
  payload.qids.forEach((qid, i) => {
    const px = pad + ((xs[i] - xLo) / xSpan) * (width - 2 * pad);
    const py = height - pad - ((ys[i] - yLo) / ySpan) * (height - 2 * pad);
    parts.push(`<circle cx="${px.toFixed(1)}" cy="${py.toFixed(1)}" r="4" fill="#1f77b4" fill-opacity="0.75"/>`);
    parts.push(`<text x="${(px + 6).toFixed(1)}" y="${(py - 6).toFixed(1)}" font-size="9" fill="#555">${escapeHtml(qid)}</text>`);
  });
  parts.push("</svg>");
  return parts.join("");
}

/**
 * 3D scatter drawn with a simple rotation about the vertical axis; the
 * angle is a local view setting, so rotating never re-queries the server.
 */
export function projection3DScatterSVG(
  payload: ProjectionPayload,
  angleDegrees: number,
  width = 460,
  height = 300,
): string {
  const theta = (angleDegrees * Math.PI) / 180;
  const cos = Math.cos(theta);
  const sin = Math.sin(theta);
  const projected = payload.coordinates.map((c) => {
    const [x, y = 0, z = 0] = c;
    return [x * cos + z * sin, y, -x * sin + z * cos];
  });
  const xs = projected.map((p) => p[0]);
  const ys = projected.map((p) => p[1]);
  const zs = projected.map((p) => p[2]);
  const pad = 40;
  const span = (vals: number[]) => {
    const lo = Math.min(...vals);
    const hi = Math.max(...vals);
    return { lo, size: hi - lo || 1 };
  };
  const sx = span(xs);
  const sy = span(ys);
  const sz = span(zs);
  const order = projected.map((_, i) => i).sort((a, b) => zs[a] - zs[b]); // back to front
  const parts = [`<svg width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" role="img">`];
  for (const i of order) {
    const px = pad + ((xs[i] - sx.lo) / sx.size) * (width - 2 * pad);
    const py = height - pad - ((ys[i] - sy.lo) / sy.size) * (height - 2 * pad);
    const depth = (zs[i] - sz.lo) / sz.size;
    const radius = 3 + 3 * depth;
    parts.push(
      `<circle cx="${px.toFixed(1)}" cy="${py.toFixed(1)}" r="${radius.toFixed(1)}" fill="#1f77b4" fill-opacity="${(0.35 + 0.55 * depth).toFixed(2)}"/>`,
    );
    parts.push(
      `<text x="${(px + radius + 2).toFixed(1)}" y="${(py - radius - 1).toFixed(1)}" font-size="9" fill="#555">${escapeHtml(payload.qids[i])}</text>`,
    );
  }
  parts.push("</svg>");
  return parts.join("");
}

export function deltaBarSVG(payload: DeltaPayload, width = 460, barHeight = 16): string {
  const deltas = payload.deltas;
  const height = Math.max(40, deltas.length * (barHeight + 4) + 20);
  const maxAbs = Math.max(1e-12, ...deltas.map(([, d]) => Math.abs(d)));
  const mid = width / 2;
  const parts = [`<svg width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" role="img">`];
  parts.push(`<line x1="${mid}" y1="8" x2="${mid}" y2="${height - 8}" stroke="#999"/>`);
  deltas.forEach(([qid, delta], i) => {
    const y = 10 + i * (barHeight + 4);
    const w = (Math.abs(delta) / maxAbs) * (width / 2 - 60);
    const x = delta >= 0 ? mid : mid - w;
    const color = delta > 0 ? "#2ca02c" : delta < 0 ? "#d62728" : "#999";
    parts.push(`<rect x="${x.toFixed(1)}" y="${y}" width="${Math.max(w, 0.5).toFixed(1)}" height="${barHeight}" fill="${color}" fill-opacity="0.8"/>`);
    parts.push(
      `<text x="${delta >= 0 ? mid - 6 : mid + 6}" y="${y + barHeight - 4}" font-size="10" text-anchor="${delta >= 0 ? "end" : "start"}">${escapeHtml(qid)}</text>`,
    );
  });
  parts.push("</svg>");
  return parts.join("");
}

/**
 * Deterministic word cloud: tokens in frequency order, font size scaling
 * with sqrt(count), laid out in rows.
 */
export function wordCloudSVG(payload: TokenFrequenciesPayload, width = 460, limit = 40): string {
  const entries = payload.entries.slice(0, limit);
  if (entries.length === 0) return `<svg width="${width}" height="40"></svg>`;
  const maxCount = entries[0][1];
  const sizeOf = (count: number) => 11 + 17 * Math.sqrt(count / maxCount);
  let x = 10;
  let y = 34;
  const parts: string[] = [];
  entries.forEach(([token, count], i) => {
    const size = sizeOf(count);
    const estWidth = token.length * size * 0.62 + 12;
    if (x + estWidth > width - 10 && x > 10) {
      x = 10;
      y += 34;
    }
    const color = cssColor(PALETTE[i % PALETTE.length]);
    parts.push(
      `<text x="${x.toFixed(1)}" y="${y.toFixed(1)}" font-size="${size.toFixed(1)}" fill="${color}">${escapeHtml(token)}<title>${count}</title></text>`,
    );
    x += estWidth;
  });
  const height = y + 14;
  return `<svg width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" role="img">${parts.join("")}</svg>`;
}
