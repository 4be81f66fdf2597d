import { describe, expect, it } from "vitest";

import { skylineFromMask, skylineSegments } from "../src/overlay.js";
import {
  CLASS_NAMES,
  GROUND,
  MASK_PALETTE,
  NEAR,
  SKY,
  SNOW,
  cssColor,
  legend,
  paintOverlay,
} from "../src/palette.js";

describe("mask overlay palette", () => {
  it("matches the server's table exactly", () => {
    expect(MASK_PALETTE[SKY]).toEqual([135, 206, 235]);
    expect(MASK_PALETTE[NEAR]).toEqual([128, 128, 128]);
    expect(MASK_PALETTE[GROUND]).toEqual([139, 90, 43]);
    expect(MASK_PALETTE[SNOW]).toEqual([255, 255, 255]);
    expect(CLASS_NAMES).toEqual({ 0: "SKY", 1: "NEAR", 2: "GROUND", 3: "SNOW" });
  });

  it("paints exact palette bytes for every class", () => {
    const classes = Uint8Array.from([SKY, NEAR, GROUND, SNOW]);
    const out = new Uint8ClampedArray(16);
    paintOverlay(classes, out, 128);
    expect(Array.from(out)).toEqual([
      135, 206, 235, 128,
      128, 128, 128, 128,
      139, 90, 43, 128,
      255, 255, 255, 128,
    ]);
  });

  it("rejects unknown classes and short buffers", () => {
    expect(() => paintOverlay(Uint8Array.from([4]), new Uint8ClampedArray(4))).toThrow(/class/);
    expect(() => paintOverlay(Uint8Array.from([0, 1]), new Uint8ClampedArray(4))).toThrow(/buffer/);
  });

  it("legend lists the four classes in class-code order with exact colors", () => {
    expect(legend()).toEqual([
      { code: SKY, name: "SKY", color: "rgb(135, 206, 235)" },
      { code: NEAR, name: "NEAR", color: "rgb(128, 128, 128)" },
      { code: GROUND, name: "GROUND", color: "rgb(139, 90, 43)" },
      { code: SNOW, name: "SNOW", color: "rgb(255, 255, 255)" },
    ]);
    expect(cssColor(GROUND)).toBe("rgb(139, 90, 43)");
  });
});

describe("skyline recovery from the painted mask", () => {
  /** 4 columns with first non-sky rows [2, 0, null, 1]. */
  function pixels(): { width: number; height: number; data: Uint8ClampedArray } {
    const grid = [
      [SKY, NEAR, SKY, SKY],
      [SKY, GROUND, SKY, SNOW],
      [GROUND, SNOW, SKY, SNOW],
    ];
    const flat = Uint8Array.from(grid.flat());
    const data = new Uint8ClampedArray(flat.length * 4);
    paintOverlay(flat, data);
    return { width: 4, height: 3, data };
  }

  it("finds the first non-sky row per column", () => {
    expect(skylineFromMask(pixels())).toEqual([2, 0, null, 1]);
  });

  it("splits the polyline at all-sky gaps", () => {
    expect(skylineSegments([2, 0, null, 1])).toEqual([
      [
        [0, 2],
        [1, 0],
      ],
      [[3, 1]],
    ]);
  });

  it("depends on the palette being exact: a near-sky color is not sky", () => {
    const buffer = pixels();
    // Perturb one channel of the all-sky column's top pixel.
    const at = (0 * buffer.width + 2) * 4;
    buffer.data[at] = 136;
    expect(skylineFromMask(buffer)[2]).toBe(0);
  });
});
