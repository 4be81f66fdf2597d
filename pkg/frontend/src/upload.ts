/** Upload form: EXIF override fields, sidecar assembly, outcome polling. */

import type { ApiClient } from "./api.js";
import type { ExifMeta, MediaDetail, MediaState } from "./types.js";

export interface UploadFields {
  lat: string;
  lon: string;
  alt: string;
  takenAt: string;
  focalLength35mm: string;
}

export const EMPTY_FIELDS: UploadFields = {
  lat: "",
  lon: "",
  alt: "",
  takenAt: "",
  focalLength35mm: "",
};

export type FieldErrors = Partial<Record<keyof UploadFields, string>>;

/** Same coordinate bounds the server enforces, reported per field. */
export function validateFields(fields: UploadFields): FieldErrors {
  const errors: FieldErrors = {};
  const num = (raw: string): number | null => {
    if (raw.trim() === "") return null;
    const v = Number(raw);
    return Number.isFinite(v) ? v : NaN;
  };
  const lat = num(fields.lat);
  if (lat !== null && (Number.isNaN(lat) || lat < -90 || lat > 90)) {
    errors.lat = "latitude must be in [-90, 90]";
  }
  const lon = num(fields.lon);
  if (lon !== null && (Number.isNaN(lon) || lon < -180 || lon >= 180)) {
    errors.lon = "longitude must be in [-180, 180)";
  }
  const alt = num(fields.alt);
  if (alt !== null && (Number.isNaN(alt) || alt < -500 || alt > 9000)) {
    errors.alt = "altitude must be in [-500, 9000] m";
  }
  if (fields.takenAt.trim() !== "" && Number.isNaN(Date.parse(fields.takenAt))) {
    errors.takenAt = "timestamp must be ISO 8601";
  }
  const focal = num(fields.focalLength35mm);
  if (focal !== null && (Number.isNaN(focal) || focal <= 0)) {
    errors.focalLength35mm = "focal length must be positive";
  }
  return errors;
}

/** Sidecar body from the non-empty fields, or undefined when all are blank. */
export function buildSidecar(fields: UploadFields): object | undefined {
  const errors = validateFields(fields);
  if (Object.keys(errors).length > 0) throw new Error("fields have validation errors");
  const sidecar: Record<string, number | string> = {};
  if (fields.lat.trim() !== "") sidecar.lat = Number(fields.lat);
  if (fields.lon.trim() !== "") sidecar.lon = Number(fields.lon);
  if (fields.alt.trim() !== "") sidecar.alt = Number(fields.alt);
  if (fields.takenAt.trim() !== "") sidecar.taken_at = fields.takenAt.trim();
  if (fields.focalLength35mm.trim() !== "") {
    sidecar.focal_length_35mm_mm = Number(fields.focalLength35mm);
  }
  return Object.keys(sidecar).length > 0 ? sidecar : undefined;
}

/** Fields pre-filled from the EXIF the server parsed out of the upload. */
export function fieldsFromExif(exif: ExifMeta): UploadFields {
  const show = (v: number | null) => (v === null ? "" : String(v));
  return {
    lat: show(exif.lat),
    lon: show(exif.lon),
    alt: show(exif.alt),
    takenAt: exif.taken_at ?? "",
    focalLength35mm: show(exif.focal_length_35mm_mm),
  };
}

const PENDING_STATES: MediaState[] = ["NEW", "ALIGNED"];

export interface UploadOutcome {
  item: MediaDetail;
  /** false when the server matched existing bytes and returned that item */
  created: boolean;
}

/**
 * Poll the item until the pipeline settles it (MASKED, FILTERED_OUT or
 * FAILED). `sleep` is injectable so tests can run without real delays.
 */
export async function pollUntilDone(
  client: ApiClient,
  mediaId: string,
  opts: {
    intervalMs?: number;
    timeoutMs?: number;
    sleep?: (ms: number) => Promise<void>;
    now?: () => number;
  } = {},
): Promise<MediaDetail> {
  const intervalMs = opts.intervalMs ?? 500;
  const timeoutMs = opts.timeoutMs ?? 60_000;
  const sleep = opts.sleep ?? ((ms) => new Promise<void>((r) => setTimeout(r, ms)));
  const now = opts.now ?? (() => Date.now());
  const deadline = now() + timeoutMs;
  for (;;) {
    const detail = await client.mediaDetail(mediaId);
    if (!PENDING_STATES.includes(detail.state)) return detail;
    if (now() >= deadline) throw new Error(`item ${mediaId} still ${detail.state} after timeout`);
    await sleep(intervalMs);
  }
}

export async function uploadAndTrack(
  client: ApiClient,
  image: Blob,
  filename: string,
  fields: UploadFields,
  pollOpts?: Parameters<typeof pollUntilDone>[2],
): Promise<UploadOutcome> {
  const reply = await client.uploadPhoto(image, filename, buildSidecar(fields));
  const item = await pollUntilDone(client, reply.id, pollOpts);
  return { item, created: reply.created };
}

/** One-line outcome message: state plus the filter reason when present. */
export function describeOutcome(outcome: UploadOutcome): string {
  const { item, created } = outcome;
  const prefix = created ? "" : "already known: ";
  if (item.state === "MASKED") {
    const idx = item.snow?.snow_index;
    const tail = idx === null || idx === undefined ? "" : `, snow index ${idx.toFixed(3)}`;
    return `${prefix}processed${tail}`;
  }
  if (item.reason) return `${prefix}${item.state}: ${item.reason}`;
  return `${prefix}${item.state}`;
}
