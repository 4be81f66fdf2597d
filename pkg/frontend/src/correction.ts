/** Alignment-correction tool state: pose nudges or warp pins, then PUT. */

import { ApiClient, ApiError } from "./api.js";
import type { CorrectionResult } from "./types.js";
import { WarpDraft } from "./warp.js";
import type { DraftCheck } from "./warp.js";

export interface PoseDraft {
  yaw: number;
  pitch: number;
  hfov: number;
}

/** Pose bounds enforced by the server; checked here to gate the submit button. */
export function checkPose(pose: PoseDraft): DraftCheck {
  if (!Number.isFinite(pose.yaw) || pose.yaw < 0 || pose.yaw >= 360) {
    return { ok: false, reason: "yaw must be in [0, 360)" };
  }
  if (!Number.isFinite(pose.pitch) || pose.pitch < -20 || pose.pitch > 20) {
    return { ok: false, reason: "pitch must be in [-20, 20]" };
  }
  if (!Number.isFinite(pose.hfov) || pose.hfov < 5 || pose.hfov > 120) {
    return { ok: false, reason: "hfov must be in [5, 120]" };
  }
  return { ok: true, reason: null };
}

/** "0.4123 -> 0.3980", or "unchanged" when the index did not move. */
export function describeIndexChange(
  oldIndex: number | null,
  newIndex: number | null,
  epsilon = 1e-9,
): string {
  const fmt = (v: number | null) => (v === null ? "n/a" : v.toFixed(4));
  if (oldIndex === null && newIndex === null) return "unchanged";
  if (oldIndex !== null && newIndex !== null && Math.abs(newIndex - oldIndex) <= epsilon) {
    return "unchanged";
  }
  return `${fmt(oldIndex)} -> ${fmt(newIndex)}`;
}

export type CorrectionMode = "pose" | "warp";

export class CorrectionEditor {
  mode: CorrectionMode = "pose";
  pose: PoseDraft;
  readonly warp = new WarpDraft();
  /** last server rejection, surfaced inline; cleared on the next submit */
  error: string | null = null;
  result: CorrectionResult | null = null;

  constructor(
    private readonly client: ApiClient,
    private readonly mediaId: string,
    activePose: PoseDraft,
  ) {
    this.pose = { ...activePose };
  }

  nudgeYaw(deltaDeg: number): void {
    this.pose.yaw = ((this.pose.yaw + deltaDeg) % 360 + 360) % 360;
  }

  nudgePitch(deltaDeg: number): void {
    this.pose.pitch += deltaDeg;
  }

  check(): DraftCheck {
    return this.mode === "pose" ? checkPose(this.pose) : this.warp.check();
  }

  get submittable(): boolean {
    return this.check().ok;
  }

  /**
   * PUT the draft. On success the result (old/new index) is kept for
   * display; on rejection the message is surfaced and the draft stays
   * intact so the user can fix it.
   */
  async submit(): Promise<CorrectionResult> {
    const verdict = this.check();
    if (!verdict.ok) throw new Error(verdict.reason ?? "invalid draft");
    this.error = null;
    const body =
      this.mode === "pose"
        ? { pose: { yaw: this.pose.yaw, pitch: this.pose.pitch, hfov: this.pose.hfov } }
        : this.warp.toBody();
    try {
      this.result = await this.client.putAlignment(this.mediaId, body);
    } catch (err) {
      if (err instanceof ApiError) this.error = err.message;
      throw err;
    }
    return this.result;
  }

  /** Summary line shown after a successful submit. */
  get indexChange(): string | null {
    if (!this.result) return null;
    return describeIndexChange(this.result.old_index, this.result.new_index);
  }
}
