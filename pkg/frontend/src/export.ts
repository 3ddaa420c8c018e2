// Chart and table exports. PNG export rasterizes the same chart data shown
// on screen; CSV export passes the server's bytes through untouched.

import type { ApiClient } from "./api.js";
import { type LineChartData, prCurveChartData } from "./charts.js";
import { encodePNG } from "./png.js";
import { rasterizeLineChart } from "./raster.js";
import type { PrCurvePayload } from "./types.js";

export function lineChartPNG(data: LineChartData): Uint8Array {
  const raster = rasterizeLineChart(data);
  return encodePNG(raster.width, raster.height, raster.pixels);
}

export function prCurvePNG(payloads: PrCurvePayload[], width = 460, height = 300): Uint8Array {
  return lineChartPNG(prCurveChartData(payloads, width, height));
}

export async function exportTableCsv(api: ApiClient, sessionId: string, reference: string): Promise<Uint8Array> {
  return api.fetchCsv(sessionId, reference);
}

/** Browser-side download helper (no-op outside a DOM). */
export function downloadBytes(bytes: Uint8Array, filename: string, mime: string): void {
  if (typeof document === "undefined") return;
  const blob = new Blob([bytes.slice().buffer], { type: mime });
  const url = URL.createObjectURL(blob);
  const anchor = document.createElement("a");
  anchor.href = url;
  anchor.download = filename;
  document.body.appendChild(anchor);
  anchor.click();
  anchor.remove();
  URL.revokeObjectURL(url);
}
