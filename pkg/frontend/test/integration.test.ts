import { expect, test } from "vitest";

import {
  catalogUrl,
  dailyUrl,
  fetchCsv,
  flowsUrl,
  parseCatalog,
  RequestSequencer,
  totalsUrl,
} from "../src/api.js";
import { downloadUrl } from "../src/api.js";
import { decodeState, defaultState, encodeState, validateState } from "../src/state.js";
import { fixtureCsv, fixtureState, fixtureText, stubFetch } from "./helpers.js";

test("a copied view URL reproduces the identical query", () => {
  for (const state of [
    fixtureState({ view: "choropleth", direction: "in_and_out" }),
    fixtureState({ view: "flowmap", source: "safegraph", aoi: { minLon: 0, minLat: 0, maxLon: 2, maxLat: 1 } }),
    fixtureState({ view: "series", direction: "intraflow", place: "AAA", overlayPlace: "CCC" }),
    fixtureState({ view: "download", downloadType: "daily", minCount: 2 }),
  ]) {
    const restored = decodeState(`#${encodeState(state)}`, defaultState([]));
    expect(restored).toEqual(state);
    // identical state implies identical request URLs, i.e. the same query
    expect(totalsUrl("/REST", restored)).toBe(totalsUrl("/REST", state));
    expect(flowsUrl("/REST", restored)).toBe(flowsUrl("/REST", state));
    expect(dailyUrl("/REST", restored, "AAA")).toBe(dailyUrl("/REST", state, "AAA"));
    expect(downloadUrl("/REST", restored)).toBe(downloadUrl("/REST", state));
  }
});

test("requests built from catalog data always validate", () => {
  const catalog = parseCatalog(fixtureCsv("catalog.csv"));
  const state = { ...defaultState(catalog), place: "AAA" };
  expect(validateState(state)).toEqual([]);
  const url = new URL(totalsUrl("/REST", state), "http://x");
  expect(url.searchParams.get("source")).toBe("twitter");
  expect(url.searchParams.get("scale")).toBe("world_country");
  expect(url.searchParams.get("begin")).toBe("01/03/2020");
  expect(url.searchParams.get("end")).toBe("01/05/2020");
});

test("fetchCsv raises the server reason on non-200", async () => {
  const fetchFn = stubFetch({});
  await expect(fetchCsv(fetchFn, "/REST?operation=nope")).rejects.toThrow(/error:/);
});

test("fetchCsv parses a live-shaped catalog response", async () => {
  const fetchFn = stubFetch({ list_catalog: fixtureText("catalog.csv") });
  const csv = await fetchCsv(fetchFn, catalogUrl("/REST"));
  expect(parseCatalog(csv)[0].scale).toBe("world_country");
});

test("stale responses are discarded by sequence number", () => {
  const seq = new RequestSequencer();
  const first = seq.next();
  const second = seq.next();
  expect(seq.isCurrent(first)).toBe(false);
  expect(seq.isCurrent(second)).toBe(true);
});
