/** Hash-routed single page app wiring the modules to the DOM. */

import { ApiClient, ApiError } from "./api.js";
import { formatReadout, lookup } from "./attributes.js";
import { CorrectionEditor } from "./correction.js";
import { mapMarkers } from "./filters.js";
import type { BBox, MediaFilters } from "./filters.js";
import { heatCells, totalCount } from "./heatmap.js";
import { legend } from "./palette.js";
import { projectToPhoto } from "./project.js";
import { SequenceGate } from "./seq.js";
import { Timelapse } from "./timelapse.js";
import type { MediaDetail, MediaSummary, Webcam } from "./types.js";
import {
  EMPTY_FIELDS,
  describeOutcome,
  uploadAndTrack,
  validateFields,
} from "./upload.js";
import type { UploadFields } from "./upload.js";

const client = new ApiClient();
const gate = new SequenceGate();
const state = createFiltersState();

function createFiltersState(): { filters: MediaFilters; heatmapOn: boolean } {
  return { filters: {}, heatmapOn: false };
}

// -- tiny DOM helpers ---------------------------------------------------------

type Child = Node | string;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: Child[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  for (const child of children) {
    node.append(typeof child === "string" ? document.createTextNode(child) : child);
  }
  return node;
}

function clear(node: HTMLElement): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}

function root(): HTMLElement {
  const node = document.getElementById("app");
  if (!node) throw new Error("missing #app root");
  return node;
}

function errorBox(err: unknown): HTMLElement {
  const message =
    err instanceof ApiError ? `${err.code}: ${err.message}` : err instanceof Error ? err.message : String(err);
  return el("p", { class: "error" }, [message]);
}

// -- explorer -------------------------------------------------------------------

const REGION_BBOX: BBox = [-0.5, 8.5, 0.5, 9.5];

function markerDot(item: MediaSummary, bbox: BBox, mapEl: HTMLElement): HTMLElement {
  const [lat0, lon0, lat1, lon1] = bbox;
  const geo = item.geotag!;
  const left = ((geo.lon - lon0) / (lon1 - lon0)) * 100;
  const top = ((lat1 - geo.lat) / (lat1 - lat0)) * 100;
  const dot = el("button", {
    class: `marker marker-${item.kind.toLowerCase()}`,
    style: `left:${left.toFixed(2)}%;top:${top.toFixed(2)}%`,
    title: `${item.id} (${item.state})`,
  });
  dot.addEventListener("click", () => {
    location.hash = `#/media/${item.id}`;
  });
  mapEl.append(dot);
  return dot;
}

function filterForm(onChange: (filters: MediaFilters) => void): HTMLElement {
  const kind = el("select", { name: "kind" }, [
    el("option", { value: "" }, ["any kind"]),
    el("option", { value: "PHOTO" }, ["PHOTO"]),
    el("option", { value: "WEBCAM_FRAME" }, ["WEBCAM_FRAME"]),
  ]);
  const mediaState = el("select", { name: "state" }, [
    el("option", { value: "" }, ["any state"]),
    ...["NEW", "FILTERED_OUT", "ALIGNED", "MASKED", "FAILED"].map((s) =>
      el("option", { value: s }, [s]),
    ),
  ]);
  const minAlt = el("input", { name: "min_alt", type: "number", placeholder: "min altitude" });
  const from = el("input", { name: "from", type: "datetime-local" });
  const to = el("input", { name: "to", type: "datetime-local" });
  const peak = el("input", { name: "peak", type: "text", placeholder: "peak name" });
  const form = el("form", { class: "filters" }, [kind, mediaState, minAlt, from, to, peak]);
  form.addEventListener("change", () => {
    const filters: MediaFilters = {};
    if (kind.value) filters.kind = kind.value as MediaFilters["kind"];
    if (mediaState.value) filters.state = mediaState.value as MediaFilters["state"];
    if (minAlt.value) filters.minAlt = Number(minAlt.value);
    if (from.value) filters.from = new Date(from.value).toISOString();
    if (to.value) filters.to = new Date(to.value).toISOString();
    if (peak.value) filters.peak = peak.value;
    onChange(filters);
  });
  return form;
}

async function renderExplorer(): Promise<void> {
  const app = root();
  clear(app);
  const mapEl = el("div", { class: "map" });
  const status = el("p", { class: "status" });
  const heatToggle = el("label", {}, [
    Object.assign(el("input", { type: "checkbox" }), { checked: state.heatmapOn }),
    " heat map",
  ]);
  const listEl = el("ul", { class: "media-list" });
  app.append(
    el("h1", {}, ["Explore"]),
    filterForm((filters) => {
      state.filters = filters;
      void refresh();
    }),
    heatToggle,
    status,
    mapEl,
    listEl,
  );
  heatToggle.querySelector("input")?.addEventListener("change", (ev) => {
    state.heatmapOn = (ev.target as HTMLInputElement).checked;
    void refresh();
  });

  async function refresh(): Promise<void> {
    let summary: string;
    try {
      const reply = await gate.run("explorer", () => client.listMedia(state.filters));
      if (reply === null) return; // superseded by a newer filter change
      clear(mapEl);
      clear(listEl);
      const markers = mapMarkers(reply.items);
      summary =
        reply.total === 0
          ? "no media match the current filters"
          : `${reply.total} item(s), ${markers.length} on the map`;
      for (const item of markers) markerDot(item, REGION_BBOX, mapEl);
      for (const item of reply.items) {
        const link = el("a", { href: `#/media/${item.id}` }, [
          `${item.kind} ${item.id.slice(0, 8)} ${item.state}`,
        ]);
        const snow = item.snow_index === null ? "" : ` snow ${item.snow_index.toFixed(3)}`;
        listEl.append(el("li", {}, [link, snow]));
      }
      if (state.heatmapOn) {
        const heat = await gate.run("heatmap", () => client.heatmap(REGION_BBOX, 0.1));
        if (heat === null) return;
        for (const cell of heatCells(heat)) {
          const [lat0, lon0, lat1, lon1] = REGION_BBOX;
          const left = ((cell.lonMin - lon0) / (lon1 - lon0)) * 100;
          const top = ((lat1 - cell.latMax) / (lat1 - lat0)) * 100;
          const w = ((cell.lonMax - cell.lonMin) / (lon1 - lon0)) * 100;
          const h = ((cell.latMax - cell.latMin) / (lat1 - lat0)) * 100;
          mapEl.append(
            el("div", {
              class: "heat-cell",
              style:
                `left:${left.toFixed(2)}%;top:${top.toFixed(2)}%;` +
                `width:${w.toFixed(2)}%;height:${h.toFixed(2)}%;` +
                `opacity:${(0.2 + 0.6 * cell.intensity).toFixed(2)}`,
              title: `${cell.count}`,
            }),
          );
        }
        summary += `, heat total ${totalCount(heat)}`;
      }
    } catch (err) {
      summary = errorBox(err).textContent ?? "request failed";
    }
    status.textContent = summary;
  }

  await refresh();
}

// -- media detail ---------------------------------------------------------------

function maskLegend(): HTMLElement {
  const items = legend().map((entry) =>
    el("li", {}, [
      el("span", { class: "swatch", style: `background:${entry.color}` }),
      ` ${entry.name}`,
    ]),
  );
  return el("ul", { class: "legend" }, items);
}

function peakLabels(detail: MediaDetail, frame: HTMLElement, width: number, height: number): void {
  const pose = detail.alignment;
  if (!pose) return;
  for (const mark of detail.peak_marks) {
    const pt = projectToPhoto(pose, width, height, mark.azimuth, mark.elevation);
    if (!pt.visible) continue;
    const label = el("a", {
      class: "peak-label",
      style: `left:${((pt.x / width) * 100).toFixed(2)}%;top:${((pt.y / height) * 100).toFixed(2)}%`,
      href: "#/explore",
      title: `${mark.name} ${mark.alt.toFixed(0)} m`,
    }, [mark.name]);
    label.addEventListener("click", () => {
      state.filters = { peak: mark.name };
    });
    frame.append(label);
  }
}

async function renderDetail(mediaId: string): Promise<void> {
  const app = root();
  clear(app);
  let detail: MediaDetail;
  try {
    detail = await client.mediaDetail(mediaId);
  } catch (err) {
    app.append(errorBox(err));
    return;
  }
  const frame = el("div", { class: "photo-frame" });
  const img = el("img", { src: client.imageUrl(mediaId), alt: mediaId });
  frame.append(img);
  const mask = el("img", {
    src: client.maskUrl(mediaId),
    class: "mask-overlay",
    style: "display:none;opacity:0.5",
    alt: "mask",
  });
  frame.append(mask);
  const maskToggle = el("button", {}, ["toggle mask"]);
  maskToggle.addEventListener("click", () => {
    mask.style.display = mask.style.display === "none" ? "block" : "none";
  });
  const readout = el("p", { class: "readout" });
  frame.addEventListener("mousemove", (ev) => {
    if (!detail.attributes) return;
    const rect = frame.getBoundingClientRect();
    const x = ((ev.clientX - rect.left) / rect.width) * (img.naturalWidth || rect.width);
    const y = ((ev.clientY - rect.top) / rect.height) * (img.naturalHeight || rect.height);
    if (x < 0 || y < 0) return;
    readout.textContent = formatReadout(lookup(detail.attributes, x, y));
  });
  img.addEventListener("load", () => {
    peakLabels(detail, frame, img.naturalWidth, img.naturalHeight);
  });

  const meta = el("dl", {}, [
    el("dt", {}, ["state"]),
    el("dd", {}, [detail.reason ? `${detail.state} (${detail.reason})` : detail.state]),
    el("dt", {}, ["taken"]),
    el("dd", {}, [detail.taken_at ?? "unknown"]),
    el("dt", {}, ["peaks"]),
    el("dd", {}, [detail.peaks.join(", ") || "none"]),
    el("dt", {}, ["snow index"]),
    el("dd", {}, [
      detail.snow && detail.snow.snow_index !== null ? detail.snow.snow_index.toFixed(3) : "n/a",
    ]),
  ]);
  app.append(el("h1", {}, [`Media ${mediaId.slice(0, 8)}`]), frame, readout, maskToggle, maskLegend(), meta);
  if (detail.alignment) renderCorrectionTool(app, mediaId, detail);
}

function renderCorrectionTool(app: HTMLElement, mediaId: string, detail: MediaDetail): void {
  const active = detail.alignment!;
  const editor = new CorrectionEditor(client, mediaId, {
    yaw: active.yaw,
    pitch: active.pitch,
    hfov: active.hfov,
  });
  const info = el("p", {}, [
    `alignment ${active.source}, yaw ${active.yaw.toFixed(2)}, ` +
      `pitch ${active.pitch.toFixed(2)}, score ${active.score.toFixed(3)}` +
      (active.ambiguous ? " (ambiguous)" : ""),
  ]);
  const message = el("p", { class: "correction-message" });
  const submit = el("button", {}, ["submit correction"]);
  const nudge = (label: string, fn: () => void): HTMLElement => {
    const b = el("button", {}, [label]);
    b.addEventListener("click", () => {
      fn();
      sync();
    });
    return b;
  };
  const controls = el("div", { class: "correction" }, [
    nudge("yaw -0.1", () => editor.nudgeYaw(-0.1)),
    nudge("yaw +0.1", () => editor.nudgeYaw(0.1)),
    nudge("pitch -0.1", () => editor.nudgePitch(-0.1)),
    nudge("pitch +0.1", () => editor.nudgePitch(0.1)),
    submit,
    message,
  ]);
  function sync(): void {
    const verdict = editor.check();
    submit.toggleAttribute("disabled", !verdict.ok);
    message.textContent = verdict.ok
      ? `draft yaw ${editor.pose.yaw.toFixed(2)}, pitch ${editor.pose.pitch.toFixed(2)}`
      : verdict.reason;
  }
  submit.addEventListener("click", () => {
    void editor
      .submit()
      .then(() => {
        message.textContent = `snow index ${editor.indexChange ?? ""}`;
        void renderDetail(mediaId); // refresh overlays from the server
      })
      .catch(() => {
        // editor.error carries the server message; the draft is preserved
        message.textContent = editor.error ?? "submission failed";
      });
  });
  sync();
  app.append(el("h2", {}, ["Correct alignment"]), info, controls);
}

// -- webcams ----------------------------------------------------------------------

async function renderWebcam(webcamId: string, date?: string): Promise<void> {
  const app = root();
  clear(app);
  let cams: { webcams: Webcam[] };
  try {
    cams = await client.webcams();
  } catch (err) {
    app.append(errorBox(err));
    return;
  }
  const cam = cams.webcams.find((c) => c.id === webcamId);
  if (!cam) {
    app.append(errorBox(new Error(`unknown webcam ${webcamId}`)));
    return;
  }
  const reply = await client.webcamFrames(webcamId, date);
  const player = new Timelapse(reply.frames);
  const img = el("img", { class: "frame", alt: webcamId });
  const counter = el("span", {}, ["-"]);
  player.onFrame = (frame, index) => {
    img.setAttribute("src", client.imageUrl(frame.id));
    counter.textContent = `${index + 1}/${player.frames.length} ${frame.taken_at ?? ""}`;
  };
  const play = el("button", {}, ["play"]);
  play.addEventListener("click", () => {
    if (player.playing) {
      player.pause();
      play.textContent = "play";
    } else {
      player.play();
      play.textContent = "pause";
    }
  });
  if (player.frames.length > 0) player.seek(0);

  const series = await client.snowIndex();
  const chart = el("ul", { class: "snow-series" });
  for (const rec of series.records) {
    chart.append(
      el("li", {}, [
        `${rec.timestamp.slice(0, 10)}: ` +
          (rec.snow_index === null ? "no usable frame" : rec.snow_index.toFixed(3)),
      ]),
    );
  }
  app.append(
    el("h1", {}, [`Webcam ${cam.id}`]),
    el("p", {}, [`${cam.lat.toFixed(4)}, ${cam.lon.toFixed(4)}, hfov ${cam.hfov}`]),
    img,
    el("p", {}, [play, " ", counter]),
    el("h2", {}, ["Snow index"]),
    chart,
  );
}

// -- upload ---------------------------------------------------------------------

function renderUpload(): void {
  const app = root();
  clear(app);
  const file = el("input", { type: "file", accept: "image/jpeg,image/png" });
  const fields: UploadFields = { ...EMPTY_FIELDS };
  const inputs: Partial<Record<keyof UploadFields, HTMLInputElement>> = {};
  const formRows: HTMLElement[] = (
    [
      ["lat", "latitude"],
      ["lon", "longitude"],
      ["alt", "altitude m"],
      ["takenAt", "taken at (ISO)"],
      ["focalLength35mm", "focal length (35mm eq.)"],
    ] as Array<[keyof UploadFields, string]>
  ).map(([key, label]) => {
    const input = el("input", { type: "text", placeholder: label });
    const error = el("span", { class: "field-error" });
    input.addEventListener("input", () => {
      fields[key] = input.value;
      const problems = validateFields(fields);
      error.textContent = problems[key] ?? "";
      submit.toggleAttribute("disabled", Object.keys(problems).length > 0);
    });
    inputs[key] = input;
    return el("p", {}, [label + " ", input, " ", error]);
  });
  const submit = el("button", {}, ["upload"]);
  const outcome = el("p", { class: "status" });
  submit.addEventListener("click", () => {
    const chosen = file.files?.[0];
    if (!chosen) {
      outcome.textContent = "choose a file first";
      return;
    }
    outcome.textContent = "uploading…";
    void uploadAndTrack(client, chosen, chosen.name, fields)
      .then((result) => {
        outcome.textContent = describeOutcome(result);
        if (result.item.state === "MASKED") location.hash = `#/media/${result.item.id}`;
      })
      .catch((err) => {
        outcome.textContent = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
      });
  });
  app.append(el("h1", {}, ["Upload"]), el("p", {}, [file]), ...formRows, submit, outcome);
}

// -- router -----------------------------------------------------------------------

export function route(): void {
  const hash = location.hash || "#/explore";
  const [path, query] = hash.slice(1).split("?");
  const parts = (path ?? "").split("/").filter(Boolean);
  if (parts[0] === "media" && parts[1]) {
    void renderDetail(parts[1]);
  } else if (parts[0] === "webcams" && parts[1]) {
    const date = query ? new URLSearchParams(query).get("date") ?? undefined : undefined;
    void renderWebcam(parts[1], date);
  } else if (parts[0] === "upload") {
    renderUpload();
  } else {
    void renderExplorer();
  }
}

if (typeof window !== "undefined" && typeof document !== "undefined") {
  window.addEventListener("hashchange", route);
  window.addEventListener("DOMContentLoaded", route);
}
