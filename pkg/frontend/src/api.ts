/** Thin typed client over the media API. All state lives server-side. */

import type {
  AlignmentView,
  CorrectionResult,
  ErrorEnvelope,
  FrameList,
  Heatmap,
  MediaDetail,
  MediaList,
  Peak,
  SnowRecord,
  UploadReply,
  Webcam,
} from "./types.js";
import type { BBox, MediaFilters } from "./filters.js";
import { filtersToQuery } from "./filters.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

function withQuery(path: string, params?: Record<string, string>): string {
  if (!params || Object.keys(params).length === 0) return path;
  const search = new URLSearchParams(params);
  return `${path}?${search.toString()}`;
}

async function envelope(resp: Response): Promise<ApiError> {
  let code = "unknown";
  let message = `HTTP ${resp.status}`;
  try {
    const body = (await resp.json()) as ErrorEnvelope;
    code = body.code;
    message = body.message;
  } catch {
    // non-JSON error body; keep the fallback envelope
  }
  return new ApiError(resp.status, code, message);
}

export interface Uploaded extends UploadReply {
  /** false when the server deduplicated to an existing item (HTTP 200) */
  created: boolean;
}

export class ApiClient {
  constructor(
    private readonly base = "",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.base + path, init);
    if (!resp.ok) throw await envelope(resp);
    return (await resp.json()) as T;
  }

  listMedia(filters: MediaFilters = {}): Promise<MediaList> {
    return this.request(withQuery("/api/media", filtersToQuery(filters)));
  }

  mediaDetail(id: string): Promise<MediaDetail> {
    return this.request(`/api/media/${encodeURIComponent(id)}`);
  }

  alignment(id: string): Promise<AlignmentView> {
    return this.request(`/api/media/${encodeURIComponent(id)}/alignment`);
  }

  putAlignment(
    id: string,
    body: { pose: { yaw: number; pitch: number; hfov: number } } | { warp: { points: number[][] } },
  ): Promise<CorrectionResult> {
    return this.request(`/api/media/${encodeURIComponent(id)}/alignment`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  heatmap(bbox: BBox, cell: number): Promise<Heatmap> {
    return this.request(withQuery("/api/heatmap", { bbox: bbox.join(","), cell: String(cell) }));
  }

  webcams(): Promise<{ webcams: Webcam[] }> {
    return this.request("/api/webcams");
  }

  webcamFrames(id: string, date?: string): Promise<FrameList> {
    return this.request(
      withQuery(`/api/webcams/${encodeURIComponent(id)}/frames`, date ? { date } : undefined),
    );
  }

  snowIndex(params: { region?: string; from?: string; to?: string } = {}): Promise<{ records: SnowRecord[] }> {
    const q: Record<string, string> = {};
    if (params.region) q.region = params.region;
    if (params.from) q.from = params.from;
    if (params.to) q.to = params.to;
    return this.request(withQuery("/api/snowindex", q));
  }

  peaks(bbox?: BBox): Promise<{ peaks: Peak[] }> {
    return this.request(withQuery("/api/peaks", bbox ? { bbox: bbox.join(",") } : undefined));
  }

  async uploadPhoto(image: Blob, filename: string, sidecar?: object): Promise<Uploaded> {
    const form = new FormData();
    form.append("image", image, filename);
    if (sidecar !== undefined) form.append("sidecar", JSON.stringify(sidecar));
    const resp = await this.fetchFn(`${this.base}/api/photos`, { method: "POST", body: form });
    if (!resp.ok) throw await envelope(resp);
    const reply = (await resp.json()) as UploadReply;
    return { ...reply, created: resp.status === 201 };
  }

  imageUrl(id: string): string {
    return `${this.base}/api/media/${encodeURIComponent(id)}/image`;
  }

  maskUrl(id: string): string {
    return `${this.base}/api/media/${encodeURIComponent(id)}/mask.png`;
  }
}
