/** Map-explorer filter state and its translation to media query params. */

import type { MediaKind, MediaState, MediaSummary } from "./types.js";

export type BBox = [number, number, number, number]; // lat0, lon0, lat1, lon1

export interface MediaFilters {
  kind?: MediaKind;
  state?: MediaState;
  bbox?: BBox;
  minAlt?: number;
  from?: string;
  to?: string;
  peak?: string;
  offset?: number;
  limit?: number;
}

/** Translate filter state into the query params the listing endpoint takes.
 * Unset fields are omitted entirely so the server applies no filter. */
export function filtersToQuery(f: MediaFilters): Record<string, string> {
  const q: Record<string, string> = {};
  if (f.kind !== undefined) q.kind = f.kind;
  if (f.state !== undefined) q.state = f.state;
  if (f.bbox !== undefined) {
    const [lat0, lon0, lat1, lon1] = f.bbox;
    if (lat0 > lat1 || lon0 > lon1) throw new Error("bbox coordinates out of order");
    q.bbox = f.bbox.join(",");
  }
  if (f.minAlt !== undefined) q.min_alt = String(f.minAlt);
  if (f.from !== undefined && f.from !== "") q.from = f.from;
  if (f.to !== undefined && f.to !== "") q.to = f.to;
  if (f.peak !== undefined && f.peak !== "") q.peak = f.peak;
  if (f.offset !== undefined) q.offset = String(f.offset);
  if (f.limit !== undefined) q.limit = String(f.limit);
  return q;
}

/** Only geotagged items can be placed on the map. */
export function mapMarkers(items: MediaSummary[]): MediaSummary[] {
  return items.filter((it) => it.geotag !== null);
}
