import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";

import { parseCsv } from "../src/csv.js";
import type { Csv, FeatureCollection, UiQueryState } from "../src/types.js";

export function fixtureText(name: string): string {
  return readFileSync(fileURLToPath(new URL(`./fixtures/${name}`, import.meta.url)), "utf-8");
}

export function fixtureBytes(name: string): Uint8Array {
  return new Uint8Array(
    readFileSync(fileURLToPath(new URL(`./fixtures/${name}`, import.meta.url))),
  );
}

export function fixtureCsv(name: string): Csv {
  return parseCsv(fixtureText(name));
}

export function fixtureBoundaries(): FeatureCollection {
  return JSON.parse(fixtureText("boundaries.geojson")) as FeatureCollection;
}

export function fixtureState(overrides: Partial<UiQueryState> = {}): UiQueryState {
  return {
    source: "twitter",
    scale: "world_country",
    begin: "01/01/2020",
    end: "01/31/2020",
    view: "choropleth",
    direction: "inflow",
    place: "BBB",
    overlayPlace: null,
    aoi: null,
    minCount: null,
    downloadType: "aggregated",
    ...overrides,
  };
}

/** Stub fetch that serves canned bodies keyed by operation name. */
export function stubFetch(routes: Record<string, string>, log?: string[]) {
  return async (url: string) => {
    log?.push(url);
    const operation = new URL(url, "http://test.local").searchParams.get("operation") ?? "";
    const body = routes[operation];
    return {
      status: body === undefined ? 400 : 200,
      text: async () => body ?? "error: no canned response",
    };
  };
}
