import { column } from "./csv.js";
import type { Csv } from "./types.js";

export const SERIES_COLORS = ["#1f78b4", "#e31a1c"];

export interface SeriesLine {
  place: string;
  color: string;
  points: { date: string; value: number }[];
  sum: number;
}

export interface SeriesViewModel {
  lines: SeriesLine[];
  maxValue: number;
}

/**
 * Chart model for one or two places' daily series. Points map 1:1 onto the
 * API's date,cnt rows (the server emits gapless series); the per-line sum is
 * the explicit client-side aggregate used by tests to cross-check the CSV.
 */
export function buildSeries(perPlace: { place: string; csv: Csv }[]): SeriesViewModel {
  const lines = perPlace.map(({ place, csv }, idx) => {
    const dates = column(csv, "date");
    const counts = column(csv, "cnt").map(Number);
    return {
      place,
      color: SERIES_COLORS[idx % SERIES_COLORS.length],
      points: dates.map((date, i) => ({ date, value: counts[i] })),
      sum: counts.reduce((acc, v) => acc + v, 0),
    };
  });
  const maxValue = Math.max(1, ...lines.flatMap((l) => l.points.map((p) => p.value)));
  return { lines, maxValue };
}

/** SVG polyline points for a series within a width x height chart box. */
export function polylinePoints(
  line: SeriesLine,
  maxValue: number,
  width: number,
  height: number,
): string {
  const n = line.points.length;
  return line.points
    .map((p, i) => {
      const x = n === 1 ? width / 2 : (i / (n - 1)) * width;
      const y = height - (p.value / maxValue) * height;
      return `${Math.round(x * 100) / 100},${Math.round(y * 100) / 100}`;
    })
    .join(" ");
}
