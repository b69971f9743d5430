import type { Aoi, CatalogEntry, Direction, SourceKey, UiQueryState, ViewMode } from "./types.js";

const DIRECTIONS: Direction[] = ["inflow", "outflow", "in_and_out", "intraflow"];
const VIEWS: ViewMode[] = ["choropleth", "flowmap", "series", "download"];
const SOURCES: SourceKey[] = ["twitter", "safegraph"];

/** Flow-map display default for the device-count source. */
export const SAFEGRAPH_FLOWMAP_MIN_COUNT = 20;

export function defaultState(catalog: CatalogEntry[]): UiQueryState {
  const entry = catalog[0];
  return {
    source: entry ? entry.source : "twitter",
    scale: entry ? entry.scale : "world_country",
    begin: entry ? isoToApi(entry.firstDate) : "01/01/2020",
    end: entry ? isoToApi(entry.lastDate) : "12/31/2020",
    view: "choropleth",
    direction: "in_and_out",
    place: null,
    overlayPlace: null,
    aoi: null,
    minCount: null,
    downloadType: "aggregated",
  };
}

export function isoToApi(iso: string): string {
  const [y, m, d] = iso.split("-");
  return `${m}/${d}/${y}`;
}

/** The effective min-count: explicit value, else the source/view default. */
export function effectiveMinCount(state: UiQueryState): number {
  if (state.minCount !== null) {
    return state.minCount;
  }
  return state.view === "flowmap" && state.source === "safegraph"
    ? SAFEGRAPH_FLOWMAP_MIN_COUNT
    : 0;
}

export interface Violation {
  field: string;
  message: string;
}

/**
 * Client-side mirror of the server's request rules, so the UI never issues a
 * request the server would reject.
 */
export function validateState(state: UiQueryState): Violation[] {
  const out: Violation[] = [];
  if (state.direction === "intraflow" && state.view !== "series") {
    out.push({ field: "direction", message: "intraflow is only valid for Daily Movements" });
  }
  if ((state.view === "choropleth" || state.view === "series") && !state.place) {
    out.push({ field: "place", message: "select a place on the map first" });
  }
  if (apiDateValue(state.begin) === null) {
    out.push({ field: "begin", message: "begin must be MM/DD/YYYY" });
  }
  if (apiDateValue(state.end) === null) {
    out.push({ field: "end", message: "end must be MM/DD/YYYY" });
  }
  const b = apiDateValue(state.begin);
  const e = apiDateValue(state.end);
  if (b !== null && e !== null && b > e) {
    out.push({ field: "end", message: "end date precedes begin date" });
  }
  if (state.minCount !== null && (!Number.isInteger(state.minCount) || state.minCount < 0)) {
    out.push({ field: "minCount", message: "min count must be a non-negative integer" });
  }
  if (state.aoi !== null) {
    const { minLon, minLat, maxLon, maxLat } = state.aoi;
    if (minLon > maxLon || minLat > maxLat) {
      out.push({ field: "aoi", message: "area box is inverted" });
    }
  }
  return out;
}

export function apiDateValue(raw: string): number | null {
  const m = /^(\d{1,2})\/(\d{1,2})\/(\d{4})$/.exec(raw);
  if (!m) {
    return null;
  }
  const month = Number(m[1]);
  const day = Number(m[2]);
  if (month < 1 || month > 12 || day < 1 || day > 31) {
    return null;
  }
  return Number(m[3]) * 10000 + month * 100 + day;
}

/**
 * Encode the whole state into a URL hash so any view is shareable by link;
 * decode restores an identical state (round-trip identity).
 */
export function encodeState(state: UiQueryState): string {
  const params = new URLSearchParams();
  params.set("source", state.source);
  params.set("scale", state.scale);
  params.set("begin", state.begin);
  params.set("end", state.end);
  params.set("view", state.view);
  params.set("direction", state.direction);
  if (state.place) params.set("place", state.place);
  if (state.overlayPlace) params.set("overlay", state.overlayPlace);
  if (state.aoi) {
    params.set("aoi", [state.aoi.minLon, state.aoi.minLat, state.aoi.maxLon, state.aoi.maxLat].join(","));
  }
  if (state.minCount !== null) params.set("min_count", String(state.minCount));
  params.set("download_type", state.downloadType);
  return params.toString();
}

export function decodeState(hash: string, fallback: UiQueryState): UiQueryState {
  const params = new URLSearchParams(hash.replace(/^#/, ""));
  const state: UiQueryState = { ...fallback };
  const source = params.get("source");
  if (source && (SOURCES as string[]).includes(source)) state.source = source as SourceKey;
  const scale = params.get("scale");
  if (scale) state.scale = scale;
  const begin = params.get("begin");
  if (begin) state.begin = begin;
  const end = params.get("end");
  if (end) state.end = end;
  const view = params.get("view");
  if (view && (VIEWS as string[]).includes(view)) state.view = view as ViewMode;
  const direction = params.get("direction");
  if (direction && (DIRECTIONS as string[]).includes(direction)) {
    state.direction = direction as Direction;
  }
  state.place = params.get("place");
  state.overlayPlace = params.get("overlay");
  state.aoi = parseAoi(params.get("aoi"));
  const minCount = params.get("min_count");
  state.minCount = minCount === null ? null : Number(minCount);
  const dl = params.get("download_type");
  if (dl === "aggregated" || dl === "daily") state.downloadType = dl;
  return state;
}

function parseAoi(raw: string | null): Aoi | null {
  if (!raw) {
    return null;
  }
  const parts = raw.split(",").map(Number);
  if (parts.length !== 4 || parts.some((v) => !Number.isFinite(v))) {
    return null;
  }
  return { minLon: parts[0], minLat: parts[1], maxLon: parts[2], maxLat: parts[3] };
}
