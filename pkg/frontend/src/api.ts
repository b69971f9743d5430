import { parseCsv } from "./csv.js";
import { effectiveMinCount } from "./state.js";
import type { CatalogEntry, Csv, SourceKey, UiQueryState } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, public reason: string) {
    super(reason);
  }
}

/** Build the /REST query URL for one operation. */
export function restUrl(base: string, params: Record<string, string>): string {
  const search = new URLSearchParams(params);
  return `${base}?${search.toString()}`;
}

function baseParams(state: UiQueryState): Record<string, string> {
  return {
    source: state.source,
    scale: state.scale,
    begin: state.begin,
    end: state.end,
  };
}

export function totalsUrl(base: string, state: UiQueryState): string {
  return restUrl(base, {
    operation: "get_movement_between_places",
    ...baseParams(state),
    place: state.place ?? "",
    direction: state.direction,
  });
}

export function dailyUrl(base: string, state: UiQueryState, place: string): string {
  return restUrl(base, {
    operation: "get_daily_movement",
    ...baseParams(state),
    place,
    direction: state.direction,
  });
}

/** Flow-map data: the range-aggregated extraction document. */
export function flowsUrl(base: string, state: UiQueryState): string {
  const params: Record<string, string> = {
    operation: "extract_odt_flows",
    ...baseParams(state),
    type: "aggregated",
    min_count: String(effectiveMinCount(state)),
  };
  if (state.aoi) {
    const { minLon, minLat, maxLon, maxLat } = state.aoi;
    params.bbox = `${minLon},${minLat},${maxLon},${maxLat}`;
  }
  return restUrl(base, params);
}

export function downloadUrl(base: string, state: UiQueryState): string {
  const params: Record<string, string> = {
    operation: "extract_odt_flows",
    ...baseParams(state),
    type: state.downloadType,
  };
  if (state.minCount !== null) {
    params.min_count = String(state.minCount);
  }
  if (state.aoi) {
    const { minLon, minLat, maxLon, maxLat } = state.aoi;
    params.bbox = `${minLon},${minLat},${maxLon},${maxLat}`;
  }
  return restUrl(base, params);
}

export function catalogUrl(base: string): string {
  return restUrl(base, { operation: "list_catalog" });
}

export type FetchLike = (url: string) => Promise<{ status: number; text(): Promise<string> }>;

export async function fetchCsv(fetchFn: FetchLike, url: string): Promise<Csv> {
  const response = await fetchFn(url);
  const body = await response.text();
  if (response.status !== 200) {
    // the server answers errors as a single "error: <reason>" line
    throw new ApiError(response.status, body.trim());
  }
  return parseCsv(body);
}

export function parseCatalog(csv: Csv): CatalogEntry[] {
  return csv.rows.map((row) => ({
    source: row[0] as SourceKey,
    scale: row[1],
    firstDate: row[2],
    lastDate: row[3],
  }));
}

/**
 * Monotone request sequencing per panel: responses superseded by a newer
 * request are discarded instead of rendered.
 */
export class RequestSequencer {
  private seq = 0;

  next(): number {
    return ++this.seq;
  }

  isCurrent(token: number): boolean {
    return token === this.seq;
  }
}
