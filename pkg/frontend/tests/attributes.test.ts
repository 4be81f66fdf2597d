import { describe, expect, it } from "vitest";

import { formatReadout, lookup } from "../src/attributes.js";
import type { AttributeGrid } from "../src/types.js";

/** 2x3 grid, stride 4: photo is 12 px wide, 8 px tall. */
const GRID: AttributeGrid = {
  stride: 4,
  rows: 2,
  cols: 3,
  cells: [null, [2700.0, 2200.0], null, [850.0, 1790.5], [1200.0, 1650.0], null],
};

describe("hover readout", () => {
  it("reads sky for null cells", () => {
    expect(lookup(GRID, 0, 0)).toEqual({ kind: "sky" });
    expect(formatReadout(lookup(GRID, 1, 3))).toBe("sky");
  });

  it("maps pixels to their stride cell", () => {
    expect(lookup(GRID, 4, 0)).toEqual({ kind: "terrain", distanceM: 2700.0, altitudeM: 2200.0 });
    expect(lookup(GRID, 7, 3)).toEqual({ kind: "terrain", distanceM: 2700.0, altitudeM: 2200.0 });
    expect(lookup(GRID, 0, 4)).toEqual({ kind: "terrain", distanceM: 850.0, altitudeM: 1790.5 });
    expect(lookup(GRID, 5, 6)).toEqual({ kind: "terrain", distanceM: 1200.0, altitudeM: 1650.0 });
  });

  it("clamps pixels past the last sampled cell", () => {
    expect(lookup(GRID, 11, 7)).toEqual({ kind: "sky" });
    expect(lookup(GRID, 500, 500)).toEqual({ kind: "sky" });
    expect(lookup(GRID, 5, 500)).toEqual({ kind: "terrain", distanceM: 1200.0, altitudeM: 1650.0 });
  });

  it("rejects negative coordinates", () => {
    expect(() => lookup(GRID, -1, 0)).toThrow(/non-negative/);
  });

  it("formats altitude and distance for terrain", () => {
    expect(formatReadout({ kind: "terrain", distanceM: 2700, altitudeM: 2200 })).toBe(
      "altitude 2200 m, distance 2.7 km",
    );
    expect(formatReadout({ kind: "terrain", distanceM: 850, altitudeM: 1790.5 })).toBe(
      "altitude 1791 m, distance 850 m",
    );
  });
});
