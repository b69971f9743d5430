/**
 * Browser entry point: wires controls, URL-hash state, and the view panels
 * to the query API. The page is a single query → view → re-query loop; every
 * rendered number comes from exactly one API response.
 */
import {
  ApiError,
  catalogUrl,
  dailyUrl,
  fetchCsv,
  flowsUrl,
  parseCatalog,
  RequestSequencer,
  totalsUrl,
} from "./api.js";
import { buildChoropleth, RAMP } from "./choropleth.js";
import { fetchDownload, saveInBrowser } from "./download.js";
import { buildFlowMap } from "./flowmap.js";
import { choroplethSvg, flowMapSvg, legendHtml, seriesSvg } from "./render.js";
import { buildSeries } from "./series.js";
import {
  decodeState,
  defaultState,
  effectiveMinCount,
  encodeState,
  validateState,
} from "./state.js";
import type { CatalogEntry, FeatureCollection, UiQueryState, ViewMode } from "./types.js";

const API_BASE = new URLSearchParams(window.location.search).get("api") ?? "/REST";
const BOUNDARY_BASE = "./static/boundaries";

const seq = new RequestSequencer();
let state: UiQueryState;
let catalog: CatalogEntry[] = [];
const boundaryCache = new Map<string, FeatureCollection>();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function banner(message: string | null): void {
  const box = el<HTMLDivElement>("banner");
  box.textContent = message ?? "";
  box.style.display = message ? "block" : "none";
}

async function boundaries(scale: string): Promise<FeatureCollection> {
  const cached = boundaryCache.get(scale);
  if (cached) return cached;
  const response = await fetch(`${BOUNDARY_BASE}/${scale}.geojson`);
  if (!response.ok) throw new Error(`no boundary file for scale ${scale}`);
  const fc = (await response.json()) as FeatureCollection;
  boundaryCache.set(scale, fc);
  return fc;
}

function syncControlsFromState(): void {
  el<HTMLSelectElement>("source").value = state.source;
  el<HTMLSelectElement>("scale").value = state.scale;
  el<HTMLInputElement>("begin").value = state.begin;
  el<HTMLInputElement>("end").value = state.end;
  el<HTMLSelectElement>("direction").value = state.direction;
  el<HTMLSelectElement>("view").value = state.view;
  el<HTMLInputElement>("place").value = state.place ?? "";
  el<HTMLInputElement>("overlay").value = state.overlayPlace ?? "";
  el<HTMLInputElement>("min-count").value =
    state.minCount === null ? "" : String(state.minCount);
  el<HTMLInputElement>("min-count").placeholder = String(effectiveMinCount(state));
  el<HTMLSelectElement>("download-type").value = state.downloadType;
}

function readControlsIntoState(): void {
  state = {
    ...state,
    source: el<HTMLSelectElement>("source").value as UiQueryState["source"],
    scale: el<HTMLSelectElement>("scale").value,
    begin: el<HTMLInputElement>("begin").value.trim(),
    end: el<HTMLInputElement>("end").value.trim(),
    direction: el<HTMLSelectElement>("direction").value as UiQueryState["direction"],
    view: el<HTMLSelectElement>("view").value as ViewMode,
    place: el<HTMLInputElement>("place").value.trim() || null,
    overlayPlace: el<HTMLInputElement>("overlay").value.trim() || null,
    minCount: el<HTMLInputElement>("min-count").value.trim() === ""
      ? null
      : Number(el<HTMLInputElement>("min-count").value),
    downloadType: el<HTMLSelectElement>("download-type").value as UiQueryState["downloadType"],
  };
}

function pushStateToUrl(): void {
  const encoded = encodeState(state);
  if (window.location.hash.replace(/^#/, "") !== encoded) {
    window.location.hash = encoded;
  }
}

async function runView(): Promise<void> {
  const problems = validateState(state);
  if (problems.length > 0) {
    banner(problems.map((p) => p.message).join("; "));
    return;
  }
  banner(null);
  const token = seq.next();
  const panel = el<HTMLDivElement>("panel");
  const legend = el<HTMLDivElement>("legend");
  try {
    if (state.view === "choropleth") {
      const [csv, fc] = await Promise.all([
        fetchCsv(fetch, totalsUrl(API_BASE, state)),
        boundaries(state.scale),
      ]);
      if (!seq.isCurrent(token)) return;
      const model = buildChoropleth(csv, fc, state.place);
      panel.innerHTML = choroplethSvg(model, fc);
      legend.innerHTML = legendHtml(model, RAMP);
      for (const path of panel.querySelectorAll<SVGPathElement>("path.place")) {
        path.addEventListener("click", () => {
          state = { ...state, place: path.dataset.place ?? null };
          syncControlsFromState();
          pushStateToUrl();
          void runView();
        });
      }
    } else if (state.view === "flowmap") {
      const [csv, fc] = await Promise.all([
        fetchCsv(fetch, flowsUrl(API_BASE, state)),
        boundaries(state.scale),
      ]);
      if (!seq.isCurrent(token)) return;
      const model = buildFlowMap(csv, state.direction, state.aoi);
      panel.innerHTML = flowMapSvg(model, fc);
      legend.textContent = model.notice ?? `${model.lines.length} flows`;
    } else if (state.view === "series") {
      const places = [state.place, state.overlayPlace].filter((p): p is string => !!p);
      const csvs = [];
      for (const place of places) {
        csvs.push({ place, csv: await fetchCsv(fetch, dailyUrl(API_BASE, state, place)) });
      }
      if (!seq.isCurrent(token)) return;
      const model = buildSeries(csvs);
      panel.innerHTML = seriesSvg(model);
      legend.textContent = model.lines.map((l) => `${l.place}: total ${l.sum}`).join("   ");
    } else {
      const file = await fetchDownload(fetch, API_BASE, state);
      if (!seq.isCurrent(token)) return;
      saveInBrowser(document, file);
      legend.textContent = `saved ${file.name}`;
    }
  } catch (err) {
    if (!seq.isCurrent(token)) return;
    banner(err instanceof ApiError ? err.reason : String(err));
  }
}

function applyHash(): void {
  state = decodeState(window.location.hash, state ?? defaultState(catalog));
  syncControlsFromState();
  void runView();
}

async function init(): Promise<void> {
  try {
    catalog = parseCatalog(await fetchCsv(fetch, catalogUrl(API_BASE)));
  } catch (err) {
    banner(`catalog unavailable: ${String(err)}`);
  }
  const scaleSelect = el<HTMLSelectElement>("scale");
  const seen = new Set<string>();
  for (const entry of catalog) {
    if (!seen.has(entry.scale)) {
      seen.add(entry.scale);
      const opt = document.createElement("option");
      opt.value = entry.scale;
      opt.textContent = entry.scale;
      scaleSelect.appendChild(opt);
    }
  }
  state = defaultState(catalog);
  applyHash();
  window.addEventListener("hashchange", applyHash);
  el<HTMLButtonElement>("run").addEventListener("click", () => {
    readControlsIntoState();
    pushStateToUrl();
    void runView();
  });
}

void init();
