/** Client-side draft of a manual warp, validated with the server's rules. */

/** (photo column px, photo row px, panorama azimuth deg, panorama elevation deg) */
export type WarpPoint = [number, number, number, number];

export interface DraftCheck {
  ok: boolean;
  /** human-readable reason when ok is false */
  reason: string | null;
}

/** Python-style modulo: result carries the sign of the divisor. */
function mod(a: number, n: number): number {
  return ((a % n) + n) % n;
}

/**
 * Mirror of the server's warp validation. Submitting a draft that fails
 * here would only earn a 422, so the editor gates its submit button on it.
 */
export function checkDraft(points: WarpPoint[]): DraftCheck {
  if (points.length < 2) {
    return { ok: false, reason: "a warp needs at least two control points" };
  }
  for (let i = 1; i < points.length; i++) {
    const prev = points[i - 1]!;
    const cur = points[i]!;
    if (cur[0] <= prev[0]) {
      return { ok: false, reason: "warp control columns must be strictly increasing" };
    }
  }
  for (let i = 1; i < points.length; i++) {
    const a = points[i - 1]![2];
    const b = points[i]![2];
    if (mod(b - a, 360.0) > 180.0) {
      return { ok: false, reason: "warp azimuths must be monotone (clockwise)" };
    }
  }
  return { ok: true, reason: null };
}

/** Editable warp draft: points stay sorted by photo column as they land. */
export class WarpDraft {
  private pts: WarpPoint[] = [];

  get points(): WarpPoint[] {
    return this.pts.map((p) => [...p] as WarpPoint);
  }

  get size(): number {
    return this.pts.length;
  }

  /** Insert a pin, keeping column order; replaces a pin on the same column. */
  addPoint(col: number, row: number, az: number, el: number): void {
    const pt: WarpPoint = [col, row, az, el];
    const at = this.pts.findIndex((p) => p[0] >= col);
    if (at === -1) {
      this.pts.push(pt);
    } else if (this.pts[at]![0] === col) {
      this.pts[at] = pt;
    } else {
      this.pts.splice(at, 0, pt);
    }
  }

  removePoint(index: number): void {
    if (index < 0 || index >= this.pts.length) throw new Error("no such control point");
    this.pts.splice(index, 1);
  }

  clear(): void {
    this.pts = [];
  }

  check(): DraftCheck {
    return checkDraft(this.pts);
  }

  /** True only when the draft would pass server-side validation. */
  get submittable(): boolean {
    return this.check().ok;
  }

  /** Request body for PUT .../alignment; throws when not submittable. */
  toBody(): { warp: { points: number[][] } } {
    const verdict = this.check();
    if (!verdict.ok) throw new Error(verdict.reason ?? "invalid warp");
    return { warp: { points: this.pts.map((p) => [...p]) } };
  }
}
