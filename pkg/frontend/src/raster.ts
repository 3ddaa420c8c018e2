// Software rasterizer for chart exports: draws the same geometry as the
// SVG renderer into an RGBA buffer, with no canvas dependency.

import { type LineChartData, type RGB, toPixel } from "./charts.js";

export interface Raster {
  width: number;
  height: number;
  pixels: Uint8Array; // RGBA rows, top to bottom
}

export function createRaster(width: number, height: number, background: RGB = [253, 253, 253]): Raster {
  const pixels = new Uint8Array(width * height * 4);
  for (let i = 0; i < width * height; i++) {
    pixels[i * 4] = background[0];
    pixels[i * 4 + 1] = background[1];
    pixels[i * 4 + 2] = background[2];
    pixels[i * 4 + 3] = 255;
  }
  return { width, height, pixels };
}

export function setPixel(raster: Raster, x: number, y: number, color: RGB): void {
  const xi = Math.round(x);
  const yi = Math.round(y);
  if (xi < 0 || yi < 0 || xi >= raster.width || yi >= raster.height) return;
  const offset = (yi * raster.width + xi) * 4;
  raster.pixels[offset] = color[0];
  raster.pixels[offset + 1] = color[1];
  raster.pixels[offset + 2] = color[2];
  raster.pixels[offset + 3] = 255;
}

export function drawLine(raster: Raster, x0: number, y0: number, x1: number, y1: number, color: RGB, thickness = 1): void {
  // Bresenham over rounded endpoints; thickness paints a small square brush.
  let ax = Math.round(x0);
  let ay = Math.round(y0);
  const bx = Math.round(x1);
  const by = Math.round(y1);
  const dx = Math.abs(bx - ax);
  const dy = -Math.abs(by - ay);
  const sx = ax < bx ? 1 : -1;
  const sy = ay < by ? 1 : -1;
  let err = dx + dy;
  const radius = Math.floor(thickness / 2);
  for (;;) {
    for (let ox = -radius; ox <= radius; ox++) {
      for (let oy = -radius; oy <= radius; oy++) {
        setPixel(raster, ax + ox, ay + oy, color);
      }
    }
    if (ax === bx && ay === by) break;
    const doubled = 2 * err;
    if (doubled >= dy) {
      err += dy;
      ax += sx;
    }
    if (doubled <= dx) {
      err += dx;
      ay += sy;
    }
  }
}

export function rasterizeLineChart(data: LineChartData): Raster {
  const raster = createRaster(data.width, data.height);
  const grid: RGB = [235, 235, 235];
  const axis: RGB = [51, 51, 51];
  const [x0, y0] = toPixel(data, 0, 0);
  const [x1, y1] = toPixel(data, 1, 1);
  for (let i = 0; i <= 10; i++) {
    const [gx, gy] = toPixel(data, i / 10, i / 10);
    drawLine(raster, gx, y0, gx, y1, grid);
    drawLine(raster, x0, gy, x1, gy, grid);
  }
  drawLine(raster, x0, y0, x1, y0, axis);
  drawLine(raster, x0, y0, x0, y1, axis);
  for (const series of data.series) {
    for (let i = 1; i < series.xs.length; i++) {
      const [px0, py0] = toPixel(data, series.xs[i - 1], series.ys[i - 1]);
      const [px1, py1] = toPixel(data, series.xs[i], series.ys[i]);
      drawLine(raster, px0, py0, px1, py1, series.color, 2);
    }
  }
  return raster;
}
