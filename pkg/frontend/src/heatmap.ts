/** Heat-map layer helpers: cell intensities and the legend total. */

import type { Heatmap } from "./types.js";

/** Sum of all cell counts; the legend must show exactly this number. */
export function totalCount(heatmap: Heatmap): number {
  return heatmap.cells.reduce((acc, [, , n]) => acc + n, 0);
}

export interface HeatCell {
  row: number;
  col: number;
  count: number;
  /** count / max count, in (0, 1]; drives the overlay alpha */
  intensity: number;
  /** cell bounds in degrees */
  latMin: number;
  latMax: number;
  lonMin: number;
  lonMax: number;
}

/** Expand sparse cells into drawable rectangles with relative intensity. */
export function heatCells(heatmap: Heatmap): HeatCell[] {
  const peak = heatmap.cells.reduce((acc, [, , n]) => Math.max(acc, n), 0);
  if (peak === 0) return [];
  const [lat0, lon0] = heatmap.bbox;
  return heatmap.cells.map(([row, col, count]) => ({
    row,
    col,
    count,
    intensity: count / peak,
    latMin: lat0 + row * heatmap.cell,
    latMax: lat0 + (row + 1) * heatmap.cell,
    lonMin: lon0 + col * heatmap.cell,
    lonMax: lon0 + (col + 1) * heatmap.cell,
  }));
}
