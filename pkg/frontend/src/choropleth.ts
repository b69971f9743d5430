import { column } from "./csv.js";
import type { Csv, FeatureCollection } from "./types.js";

/** 6-class sequential ramp (light to dark). */
export const RAMP = ["#ffffb2", "#fed976", "#feb24c", "#fd8d3c", "#f03b20", "#bd0026"];
export const NEUTRAL = "#e8e8e8";
export const SELECTED_STROKE = "#1f78b4";

export interface ChoroplethCell {
  placeId: string;
  value: number | null; // null = no data
  classIndex: number | null;
  color: string;
  hover: string;
  selected: boolean;
}

export interface ChoroplethViewModel {
  cells: ChoroplethCell[];
  /** Upper bound of each class; empty when there is no data. */
  breaks: number[];
  legend: string[];
  empty: boolean;
}

/**
 * Quantile class breaks: k classes over the sorted values. Robust to skewed
 * flow counts; returns fewer classes when there are fewer distinct values.
 */
export function quantileBreaks(values: number[], k = RAMP.length): number[] {
  if (values.length === 0) {
    return [];
  }
  const sorted = [...values].sort((a, b) => a - b);
  const breaks: number[] = [];
  for (let i = 1; i <= k; i++) {
    const pos = (i / k) * (sorted.length - 1);
    const lo = Math.floor(pos);
    const frac = pos - lo;
    const v = lo + 1 < sorted.length
      ? sorted[lo] * (1 - frac) + sorted[lo + 1] * frac
      : sorted[lo];
    breaks.push(v);
  }
  return [...new Set(breaks)];
}

export function classify(value: number, breaks: number[]): number {
  for (let i = 0; i < breaks.length; i++) {
    if (value <= breaks[i]) {
      return i;
    }
  }
  return breaks.length - 1;
}

/**
 * Join a place,cnt totals response onto the boundary features. Every shaded
 * value comes straight from one API row; places without a row stay neutral.
 */
export function buildChoropleth(
  totals: Csv,
  boundaries: FeatureCollection,
  selectedPlace: string | null,
): ChoroplethViewModel {
  const byPlace = new Map<string, number>();
  if (totals.rows.length > 0) {
    const places = column(totals, "place");
    const counts = column(totals, "cnt");
    places.forEach((p, i) => byPlace.set(p, Number(counts[i])));
  }
  const values = [...byPlace.values()];
  const breaks = quantileBreaks(values);
  const cells = boundaries.features.map((feature) => {
    const placeId = feature.properties.id;
    const value = byPlace.has(placeId) ? (byPlace.get(placeId) as number) : null;
    const classIndex = value === null ? null : classify(value, breaks);
    return {
      placeId,
      value,
      classIndex,
      color: classIndex === null ? NEUTRAL : RAMP[classIndex],
      hover: value === null ? `${placeId}: no data` : `${placeId}: ${value}`,
      selected: placeId === selectedPlace,
    };
  });
  return {
    cells,
    breaks,
    legend: breaks.length === 0 ? ["no data"] : breaks.map((b, i) => {
      const lo = i === 0 ? Math.min(...values) : breaks[i - 1];
      return `${formatNum(lo)} – ${formatNum(b)}`;
    }),
    empty: breaks.length === 0,
  };
}

function formatNum(v: number): string {
  return Number.isInteger(v) ? String(v) : v.toFixed(1);
}
