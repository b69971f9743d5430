import { expect, test } from "vitest";

import { sumColumn } from "../src/csv.js";
import { seriesSvg } from "../src/render.js";
import { buildSeries, polylinePoints } from "../src/series.js";
import { fixtureCsv } from "./helpers.js";

test("single-day intraflow series is one point at the API value", () => {
  const csv = fixtureCsv("daily_AAA_intraflow_single.csv");
  const model = buildSeries([{ place: "AAA", csv }]);
  expect(model.lines.length).toBe(1);
  expect(model.lines[0].points).toEqual([{ date: "2020-01-04", value: 9 }]);
  expect(model.lines[0].sum).toBe(9);
});

test("chart sum equals the fetched CSV column sum", () => {
  const csv = fixtureCsv("daily_AAA_inflow.csv");
  const model = buildSeries([{ place: "AAA", csv }]);
  expect(model.lines[0].sum).toBe(sumColumn(csv, "cnt"));
});

test("two-place overlay renders two labeled lines", () => {
  const a = fixtureCsv("daily_AAA_inflow.csv");
  const c = fixtureCsv("daily_CCC_inflow.csv");
  const model = buildSeries([
    { place: "AAA", csv: a },
    { place: "CCC", csv: c },
  ]);
  expect(model.lines.map((l) => l.place)).toEqual(["AAA", "CCC"]);
  expect(model.lines[0].color).not.toBe(model.lines[1].color);
  expect(model.lines[0].sum).toBe(sumColumn(a, "cnt"));
  expect(model.lines[1].sum).toBe(sumColumn(c, "cnt"));

  const svg = seriesSvg(model);
  expect(svg).toContain('data-place="AAA" data-sum="6"');
  expect(svg).toContain('data-place="CCC" data-sum="30"');
  expect(svg).toContain(">AAA</text>");
  expect(svg).toContain(">CCC</text>");
});

test("series are gapless as served and keep day order", () => {
  const csv = fixtureCsv("daily_AAA_inflow.csv");
  const model = buildSeries([{ place: "AAA", csv }]);
  expect(model.lines[0].points.map((p) => p.date)).toEqual([
    "2020-01-03", "2020-01-04", "2020-01-05",
  ]);
});

test("polyline scales to the chart box, single point centered", () => {
  const one = buildSeries([{ place: "X", csv: fixtureCsv("daily_AAA_intraflow_single.csv") }]);
  expect(polylinePoints(one.lines[0], one.maxValue, 100, 50)).toBe("50,0");
  const multi = buildSeries([{ place: "AAA", csv: fixtureCsv("daily_AAA_inflow.csv") }]);
  const pts = polylinePoints(multi.lines[0], multi.maxValue, 100, 50).split(" ");
  expect(pts.length).toBe(3);
  expect(pts[0].startsWith("0,")).toBe(true);
  expect(pts[2].startsWith("100,")).toBe(true);
});
