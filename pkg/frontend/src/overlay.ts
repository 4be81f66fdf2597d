/** Skyline polyline recovered from the mask overlay's exact palette. */

import { MASK_PALETTE, SKY } from "./palette.js";

/** Minimal pixel-buffer view so node tests run without a DOM canvas. */
export interface RgbaPixels {
  width: number;
  height: number;
  /** RGBA bytes, row-major, 4 per pixel */
  data: Uint8ClampedArray;
}

const SKY_RGB = MASK_PALETTE[SKY];

/**
 * First non-sky row per column of a rendered mask, or null for all-sky
 * columns. Relies on the palette being exact: any off-by-one channel
 * would misclassify, so the server and client must share the table.
 */
export function skylineFromMask(pixels: RgbaPixels): (number | null)[] {
  const { width, height, data } = pixels;
  const rows: (number | null)[] = new Array(width).fill(null);
  for (let x = 0; x < width; x++) {
    for (let y = 0; y < height; y++) {
      const at = (y * width + x) * 4;
      const sky =
        data[at] === SKY_RGB[0] && data[at + 1] === SKY_RGB[1] && data[at + 2] === SKY_RGB[2];
      if (!sky) {
        rows[x] = y;
        break;
      }
    }
  }
  return rows;
}

/** Polyline segments over the defined columns, split at gaps. */
export function skylineSegments(rows: (number | null)[]): Array<Array<[number, number]>> {
  const segments: Array<Array<[number, number]>> = [];
  let current: Array<[number, number]> | null = null;
  rows.forEach((row, x) => {
    if (row === null) {
      current = null;
      return;
    }
    if (current === null) {
      current = [];
      segments.push(current);
    }
    current.push([x, row]);
  });
  return segments;
}
