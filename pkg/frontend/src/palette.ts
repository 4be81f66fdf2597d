/** Mask overlay palette. Must match the PNG the server renders byte for byte. */

export const SKY = 0;
export const NEAR = 1;
export const GROUND = 2;
export const SNOW = 3;

export type MaskClass = typeof SKY | typeof NEAR | typeof GROUND | typeof SNOW;

export type Rgb = readonly [number, number, number];

export const MASK_PALETTE: Record<MaskClass, Rgb> = {
  [SKY]: [135, 206, 235],
  [NEAR]: [128, 128, 128],
  [GROUND]: [139, 90, 43],
  [SNOW]: [255, 255, 255],
};

export const CLASS_NAMES: Record<MaskClass, string> = {
  [SKY]: "SKY",
  [NEAR]: "NEAR",
  [GROUND]: "GROUND",
  [SNOW]: "SNOW",
};

export function cssColor(cls: MaskClass): string {
  const [r, g, b] = MASK_PALETTE[cls];
  return `rgb(${r}, ${g}, ${b})`;
}

export interface LegendEntry {
  code: MaskClass;
  name: string;
  color: string;
}

/** Legend rows in class-code order, ready to render next to the overlay. */
export function legend(): LegendEntry[] {
  return ([SKY, NEAR, GROUND, SNOW] as MaskClass[]).map((code) => ({
    code,
    name: CLASS_NAMES[code],
    color: cssColor(code),
  }));
}

/**
 * Paint mask classes into an RGBA pixel buffer (4 bytes per pixel,
 * row-major), using the exact palette. Alpha carries the overlay opacity.
 */
export function paintOverlay(
  classes: Uint8Array | number[],
  out: Uint8ClampedArray,
  alpha = 255,
): void {
  if (out.length !== classes.length * 4) {
    throw new Error("output buffer must hold 4 bytes per mask pixel");
  }
  for (let i = 0; i < classes.length; i++) {
    const cls = classes[i] as MaskClass;
    const color = MASK_PALETTE[cls];
    if (!color) throw new Error(`unknown mask class ${String(classes[i])}`);
    out[i * 4] = color[0];
    out[i * 4 + 1] = color[1];
    out[i * 4 + 2] = color[2];
    out[i * 4 + 3] = alpha;
  }
}
