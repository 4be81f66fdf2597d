/** In-memory media API double serving the documented query semantics. */

import type { FetchLike } from "../src/api.js";
import type { MediaSummary } from "../src/types.js";

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

export function errorResponse(status: number, code: string, message: string): Response {
  return jsonResponse({ code, message }, status);
}

let counter = 0;

export function item(overrides: Partial<MediaSummary> = {}): MediaSummary {
  counter += 1;
  const id = overrides.id ?? `item-${String(counter).padStart(3, "0")}`;
  return {
    id,
    kind: "PHOTO",
    source: "UPLOAD",
    state: "MASKED",
    reason: null,
    geotag: { lat: 0.1, lon: 9.1, alt: 1700 },
    taken_at: "2026-08-01T09:00:00+00:00",
    exif: {
      lat: null,
      lon: null,
      alt: null,
      taken_at: null,
      focal_length_mm: null,
      focal_length_35mm_mm: null,
    },
    payload_path: `media/${id}/original.jpg`,
    content_hash: `hash-${id}`,
    webcam_id: null,
    peaks: [],
    snow_index: null,
    ...overrides,
  };
}

const KNOWN_PARAMS = new Set([
  "kind",
  "state",
  "bbox",
  "min_alt",
  "from",
  "to",
  "peak",
  "offset",
  "limit",
]);

function matches(it: MediaSummary, params: URLSearchParams): boolean {
  const kind = params.get("kind");
  if (kind !== null && it.kind !== kind) return false;
  const state = params.get("state");
  if (state !== null && it.state !== state) return false;
  const bbox = params.get("bbox");
  if (bbox !== null) {
    const parts = bbox.split(",").map(Number);
    if (parts.length !== 4 || parts.some(Number.isNaN)) throw new Error("bad bbox");
    const [lat0, lon0, lat1, lon1] = parts as [number, number, number, number];
    if (it.geotag === null) return false;
    if (!(lat0 <= it.geotag.lat && it.geotag.lat <= lat1)) return false;
    if (!(lon0 <= it.geotag.lon && it.geotag.lon <= lon1)) return false;
  }
  const minAlt = params.get("min_alt");
  if (minAlt !== null) {
    if (it.geotag === null || it.geotag.alt === null || it.geotag.alt < Number(minAlt)) {
      return false;
    }
  }
  const from = params.get("from");
  if (from !== null) {
    if (it.taken_at === null || Date.parse(it.taken_at) < Date.parse(from)) return false;
  }
  const to = params.get("to");
  if (to !== null) {
    if (it.taken_at === null || Date.parse(it.taken_at) > Date.parse(to)) return false;
  }
  const peak = params.get("peak");
  if (peak !== null && !it.peaks.includes(peak)) return false;
  return true;
}

/** Newest first: (taken_at else epoch, id) descending, like the server. */
export function newestFirst(items: MediaSummary[]): MediaSummary[] {
  const key = (it: MediaSummary): [number, string] => [
    it.taken_at === null ? 0 : Date.parse(it.taken_at),
    it.id,
  ];
  return [...items].sort((a, b) => {
    const [ta, ia] = key(a);
    const [tb, ib] = key(b);
    if (ta !== tb) return tb - ta;
    return ia < ib ? 1 : ia > ib ? -1 : 0;
  });
}

/**
 * fetch() double for GET /api/media over a fixed fleet. Unknown query
 * parameters are rejected so a misspelled filter cannot silently pass.
 */
export function fakeMediaApi(fleet: MediaSummary[]): FetchLike {
  return async (url: string): Promise<Response> => {
    const parsed = new URL(url, "http://fake");
    if (parsed.pathname !== "/api/media") {
      return errorResponse(404, "not_found", `no route ${parsed.pathname}`);
    }
    for (const key of parsed.searchParams.keys()) {
      if (!KNOWN_PARAMS.has(key)) {
        return errorResponse(400, "bad_request", `unknown parameter ${key}`);
      }
    }
    let matched: MediaSummary[];
    try {
      matched = fleet.filter((it) => matches(it, parsed.searchParams));
    } catch (err) {
      return errorResponse(400, "bad_request", String(err));
    }
    const ordered = newestFirst(matched);
    const offset = Number(parsed.searchParams.get("offset") ?? "0");
    const limit = Number(parsed.searchParams.get("limit") ?? "100");
    return jsonResponse({ items: ordered.slice(offset, offset + limit), total: ordered.length });
  };
}
