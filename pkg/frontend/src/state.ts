/** Single source of UI state; views render from it and mutate via actions. */

import type { MediaFilters } from "./filters.js";
import { checkDraft } from "./warp.js";
import type { WarpPoint } from "./warp.js";

export interface Viewport {
  centerLat: number;
  centerLon: number;
  zoom: number;
}

export interface OverlayToggles {
  peaks: boolean;
  mask: boolean;
  heatmap: boolean;
}

export interface ViewState {
  viewport: Viewport;
  filters: MediaFilters;
  selectedId: string | null;
  overlays: OverlayToggles;
  correctionMode: boolean;
  draftPoints: WarpPoint[];
}

export function createViewState(): ViewState {
  return {
    viewport: { centerLat: 46.0, centerLon: 9.0, zoom: 8 },
    filters: {},
    selectedId: null,
    overlays: { peaks: true, mask: false, heatmap: false },
    correctionMode: false,
    draftPoints: [],
  };
}

/** Submit stays disabled until the draft satisfies the warp invariants. */
export function submissionEnabled(state: ViewState): boolean {
  return state.correctionMode && checkDraft(state.draftPoints).ok;
}
