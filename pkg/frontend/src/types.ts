/** Response shapes of the media API. Values are displayed, never recomputed. */

export type MediaKind = "PHOTO" | "WEBCAM_FRAME";
export type MediaState = "NEW" | "FILTERED_OUT" | "ALIGNED" | "MASKED" | "FAILED";
export type AlignmentSource = "AUTO" | "MANUAL";

export interface GeoTag {
  lat: number;
  lon: number;
  alt: number | null;
}

export interface ExifMeta {
  lat: number | null;
  lon: number | null;
  alt: number | null;
  taken_at: string | null;
  focal_length_mm: number | null;
  focal_length_35mm_mm: number | null;
}

export interface MediaItem {
  id: string;
  kind: MediaKind;
  source: string;
  state: MediaState;
  reason: string | null;
  geotag: GeoTag | null;
  taken_at: string | null;
  exif: ExifMeta;
  payload_path: string;
  content_hash: string;
  webcam_id: string | null;
}

export interface MediaSummary extends MediaItem {
  peaks: string[];
  snow_index: number | null;
}

export interface MediaList {
  items: MediaSummary[];
  total: number;
}

export interface Warp {
  points: number[][];
}

export interface Alignment {
  yaw: number;
  pitch: number;
  hfov: number;
  score: number;
  confidence: number;
  source: AlignmentSource;
  warp: Warp | null;
  ambiguous: boolean;
}

export interface AlignmentView {
  active: Alignment | null;
  auto: Alignment | null;
  manual: Alignment | null;
}

export interface CorrectionResult {
  alignment: Alignment;
  old_index: number | null;
  new_index: number | null;
}

export interface SnowRecord {
  media_id: string;
  timestamp: string;
  region: string;
  snow_index: number | null;
  eligible_pixels: number;
}

export interface PeakMark {
  name: string;
  azimuth: number;
  elevation: number;
  lat: number;
  lon: number;
  alt: number;
}

/** Downsampled per-pixel [distance_m, altitude_m]; null cells are sky. */
export interface AttributeGrid {
  stride: number;
  rows: number;
  cols: number;
  cells: ([number, number] | null)[];
}

export interface MediaDetail extends MediaItem {
  peaks: string[];
  peak_marks: PeakMark[];
  alignment: Alignment | null;
  snow: SnowRecord | null;
  attributes: AttributeGrid | null;
}

export interface Heatmap {
  bbox: [number, number, number, number];
  cell: number;
  rows: number;
  cols: number;
  /** Sparse [row, col, count] entries, count > 0. */
  cells: [number, number, number][];
}

export interface Webcam {
  id: string;
  lat: number;
  lon: number;
  yaw: number;
  pitch: number;
  hfov: number;
  frame_width: number;
  frame_height: number;
  poll_interval: number;
}

export interface WebcamFrame {
  id: string;
  taken_at: string | null;
  state: MediaState;
  visibility: number | null;
  usable: boolean | null;
  snow_index: number | null;
}

export interface FrameList {
  webcam_id: string;
  frames: WebcamFrame[];
}

export interface Peak {
  name: string;
  lat: number;
  lon: number;
  alt: number;
}

export interface UploadReply {
  id: string;
  state: MediaState;
}

export interface ErrorEnvelope {
  code: string;
  message: string;
}
