import { expect, test } from "vitest";

import { downloadUrl } from "../src/api.js";
import { downloadFileName, fetchDownload } from "../src/download.js";
import { fixtureBytes, fixtureState, fixtureText, stubFetch } from "./helpers.js";

test("saved file is the server response byte for byte (CLI golden copy)", async () => {
  const golden = fixtureBytes("download_golden_aggregated.csv");
  const served = fixtureText("flows_aggregated.csv");
  // the API response fixture and the CLI export golden are the same document
  expect(new TextDecoder().decode(golden)).toBe(served);

  const state = fixtureState({ view: "download", downloadType: "aggregated" });
  const file = await fetchDownload(stubFetch({ extract_odt_flows: served }), "/REST", state);
  expect(file.bytes).toEqual(golden);
});

test("daily download carries the 10-column header", () => {
  const header = fixtureText("flows_daily.csv").split("\n")[0];
  expect(header.split(",")).toEqual([
    "o_place", "d_place", "year", "month", "day", "cnt",
    "o_lat", "o_lon", "d_lat", "d_lon",
  ]);
});

test("empty filter result downloads a header-only file", async () => {
  const body = fixtureText("flows_daily_empty.csv");
  const state = fixtureState({ view: "download", downloadType: "daily" });
  const file = await fetchDownload(stubFetch({ extract_odt_flows: body }), "/REST", state);
  const text = new TextDecoder().decode(file.bytes);
  expect(text.trim().split("\n")).toHaveLength(1);
  expect(text.startsWith("o_place,d_place,year,month,day,cnt")).toBe(true);
});

test("download URL encodes the current state", () => {
  const state = fixtureState({
    view: "download", downloadType: "daily", minCount: 5,
    aoi: { minLon: -1, minLat: 0, maxLon: 5, maxLat: 1 },
  });
  const url = new URL(downloadUrl("/REST", state), "http://x");
  expect(url.searchParams.get("operation")).toBe("extract_odt_flows");
  expect(url.searchParams.get("type")).toBe("daily");
  expect(url.searchParams.get("begin")).toBe("01/01/2020");
  expect(url.searchParams.get("min_count")).toBe("5");
  expect(url.searchParams.get("bbox")).toBe("-1,0,5,1");
});

test("server error surfaces the reason line", async () => {
  const state = fixtureState({ view: "download" });
  const failing = async () => ({ status: 400, text: async () => "error: bad bbox\n" });
  await expect(fetchDownload(failing, "/REST", state)).rejects.toThrow("error: bad bbox");
});

test("file name reflects the query", () => {
  const name = downloadFileName(fixtureState({ downloadType: "daily" }));
  expect(name).toBe("flows_twitter_world_country_01-01-2020_01-31-2020_daily.csv");
});
