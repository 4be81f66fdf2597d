import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import type { FetchLike } from "../src/api.js";
import { CorrectionEditor, checkPose, describeIndexChange } from "../src/correction.js";
import { pixelToAngles } from "../src/project.js";
import { checkDraft, WarpDraft } from "../src/warp.js";
import type { WarpPoint } from "../src/warp.js";
import type { Alignment } from "../src/types.js";
import { errorResponse, jsonResponse } from "./fixtures.js";

const ACTIVE = { yaw: 10, pitch: 8, hfov: 53.13010235415598 };

function alignmentReply(overrides: Partial<Alignment> = {}): Alignment {
  return {
    ...ACTIVE,
    score: 0.01,
    confidence: 0.98,
    source: "MANUAL",
    warp: null,
    ambiguous: false,
    ...overrides,
  };
}

interface Recorded {
  url: string;
  method: string;
  body: unknown;
}

/** PUT-recording fetch double; replies come from the queue in order. */
function recordingFetch(replies: Response[]): { fetch: FetchLike; calls: Recorded[] } {
  const calls: Recorded[] = [];
  return {
    calls,
    fetch: async (url, init) => {
      calls.push({
        url,
        method: init?.method ?? "GET",
        body: typeof init?.body === "string" ? JSON.parse(init.body) : null,
      });
      const next = replies.shift();
      if (!next) throw new Error("fetch double exhausted");
      return next;
    },
  };
}

/** Identity pins: photo pixels paired with their own angles under the pose. */
function identityPoints(width: number, height: number): WarpPoint[] {
  const row = Math.floor(height / 2);
  return [Math.floor(width * 0.1), Math.floor(width * 0.9)].map((col) => {
    const { azimuth, elevation } = pixelToAngles(ACTIVE, width, height, col, row);
    return [col, row, azimuth, elevation] as WarpPoint;
  });
}

describe("identity-warp submission", () => {
  it("reports an unchanged snow index", async () => {
    const index = 0.4271;
    const { fetch, calls } = recordingFetch([
      jsonResponse({
        alignment: alignmentReply({ warp: { points: identityPoints(640, 480).map((p) => [...p]) } }),
        old_index: index,
        new_index: index,
      }),
    ]);
    const editor = new CorrectionEditor(new ApiClient("", fetch), "m1", ACTIVE);
    editor.mode = "warp";
    for (const [col, rowPx, az, el] of identityPoints(640, 480)) {
      editor.warp.addPoint(col, rowPx, az, el);
    }
    expect(editor.submittable).toBe(true);
    const result = await editor.submit();
    expect(result.new_index).toBe(result.old_index);
    expect(editor.indexChange).toBe("unchanged");
    expect(calls).toHaveLength(1);
    expect(calls[0]!.method).toBe("PUT");
    expect(calls[0]!.url).toBe("/api/media/m1/alignment");
    expect(calls[0]!.body).toEqual({ warp: { points: identityPoints(640, 480).map((p) => [...p]) } });
  });

  it("reports a real change when the index moves", () => {
    expect(describeIndexChange(0.42, 0.37)).toBe("0.4200 -> 0.3700");
    expect(describeIndexChange(null, 0.37)).toBe("n/a -> 0.3700");
    expect(describeIndexChange(0.42, 0.42 + 5e-10)).toBe("unchanged");
    expect(describeIndexChange(null, null)).toBe("unchanged");
  });
});

describe("draft validation mirrors the server", () => {
  it("monotonicity-violating draft cannot be submitted", async () => {
    const { fetch, calls } = recordingFetch([]);
    const editor = new CorrectionEditor(new ApiClient("", fetch), "m1", ACTIVE);
    editor.mode = "warp";
    // Columns increase but the azimuths run counter-clockwise.
    editor.warp.addPoint(100, 240, 40.0, 2.0);
    editor.warp.addPoint(500, 240, 20.0, 2.0);
    expect(editor.submittable).toBe(false);
    expect(editor.check().reason).toMatch(/monotone/);
    await expect(editor.submit()).rejects.toThrow(/monotone/);
    expect(calls).toHaveLength(0);
  });

  it("wrap-around counts as clockwise only within half a turn", () => {
    const ok: WarpPoint[] = [
      [0, 0, 350.0, 1.0],
      [100, 0, 10.0, 1.0],
    ];
    expect(checkDraft(ok).ok).toBe(true);
    const reversed: WarpPoint[] = [
      [0, 0, 10.0, 1.0],
      [100, 0, 350.0, 1.0],
    ];
    expect(checkDraft(reversed).ok).toBe(false);
  });

  it("requires two points and strictly increasing columns", () => {
    expect(checkDraft([]).reason).toMatch(/two control points/);
    expect(checkDraft([[5, 0, 10, 0]]).reason).toMatch(/two control points/);
    expect(
      checkDraft([
        [5, 0, 10, 0],
        [5, 1, 11, 0],
      ]).reason,
    ).toMatch(/strictly increasing/);
  });

  it("draft pins stay sorted and same-column pins replace", () => {
    const draft = new WarpDraft();
    draft.addPoint(300, 10, 30, 1);
    draft.addPoint(100, 10, 10, 1);
    draft.addPoint(300, 20, 31, 2);
    expect(draft.points).toEqual([
      [100, 10, 10, 1],
      [300, 20, 31, 2],
    ]);
    draft.removePoint(0);
    expect(draft.size).toBe(1);
    expect(draft.submittable).toBe(false);
  });
});

describe("server rejection", () => {
  it("surfaces the message and preserves the draft", async () => {
    const { fetch } = recordingFetch([
      errorResponse(422, "warp_invalid", "invalid warp: warp control column outside the photo"),
    ]);
    const editor = new CorrectionEditor(new ApiClient("", fetch), "m1", ACTIVE);
    editor.mode = "warp";
    editor.warp.addPoint(100, 240, 20.0, 2.0);
    editor.warp.addPoint(5000, 240, 40.0, 2.0);
    const before = editor.warp.points;
    await expect(editor.submit()).rejects.toBeInstanceOf(ApiError);
    expect(editor.error).toMatch(/outside the photo/);
    expect(editor.warp.points).toEqual(before);
    expect(editor.submittable).toBe(true);
  });
});

describe("pose drafts", () => {
  it("enforces the server's pose bounds", () => {
    expect(checkPose(ACTIVE).ok).toBe(true);
    expect(checkPose({ ...ACTIVE, yaw: 360 }).reason).toMatch(/yaw/);
    expect(checkPose({ ...ACTIVE, yaw: -0.1 }).reason).toMatch(/yaw/);
    expect(checkPose({ ...ACTIVE, pitch: 20.5 }).reason).toMatch(/pitch/);
    expect(checkPose({ ...ACTIVE, hfov: 4.9 }).reason).toMatch(/hfov/);
    expect(checkPose({ ...ACTIVE, hfov: 121 }).reason).toMatch(/hfov/);
  });

  it("yaw nudges wrap into [0, 360)", () => {
    const { fetch } = recordingFetch([]);
    const editor = new CorrectionEditor(new ApiClient("", fetch), "m1", { ...ACTIVE, yaw: 359.95 });
    editor.nudgeYaw(0.1);
    expect(editor.pose.yaw).toBeCloseTo(0.05, 10);
    editor.nudgeYaw(-0.1);
    expect(editor.pose.yaw).toBeCloseTo(359.95, 10);
    expect(editor.submittable).toBe(true);
  });

  it("submits the pose body and keeps the result", async () => {
    const { fetch, calls } = recordingFetch([
      jsonResponse({ alignment: alignmentReply(), old_index: 0.2, new_index: 0.31 }),
    ]);
    const editor = new CorrectionEditor(new ApiClient("", fetch), "m1", ACTIVE);
    editor.nudgeYaw(0.5);
    await editor.submit();
    expect(calls[0]!.body).toEqual({
      pose: { yaw: 10.5, pitch: 8, hfov: ACTIVE.hfov },
    });
    expect(editor.indexChange).toBe("0.2000 -> 0.3100");
  });
});
