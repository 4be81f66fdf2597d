/** Hover readout of terrain attributes from the downsampled grid. */

import type { AttributeGrid } from "./types.js";

export type Readout =
  | { kind: "sky" }
  | { kind: "terrain"; distanceM: number; altitudeM: number };

/**
 * Attributes for the photo pixel (x, y). The grid samples every
 * `stride`-th pixel, so the cell covering the pixel is the readout;
 * pixels past the last sample clamp to the nearest cell.
 */
export function lookup(grid: AttributeGrid, x: number, y: number): Readout {
  if (x < 0 || y < 0) throw new Error("pixel coordinates must be non-negative");
  const col = Math.min(Math.floor(x / grid.stride), grid.cols - 1);
  const row = Math.min(Math.floor(y / grid.stride), grid.rows - 1);
  const cell = grid.cells[row * grid.cols + col];
  if (cell === null || cell === undefined) return { kind: "sky" };
  return { kind: "terrain", distanceM: cell[0], altitudeM: cell[1] };
}

export function formatReadout(readout: Readout): string {
  if (readout.kind === "sky") return "sky";
  const dist =
    readout.distanceM >= 1000
      ? `${(readout.distanceM / 1000).toFixed(1)} km`
      : `${readout.distanceM.toFixed(0)} m`;
  return `altitude ${readout.altitudeM.toFixed(0)} m, distance ${dist}`;
}
