import { column } from "./csv.js";
import type { Aoi, Csv, Direction } from "./types.js";

export const MAX_RENDERED_LINES = 500;
export const MIN_WIDTH = 0.75;
export const MAX_WIDTH = 8;

export interface FlowLine {
  o: string;
  d: string;
  cnt: number;
  oLat: number;
  oLon: number;
  dLat: number;
  dLon: number;
  /** display-only width, monotone in cnt */
  width: number;
}

export interface FlowMapViewModel {
  lines: FlowLine[];
  notice: string | null;
  total: number;
}

function inBox(aoi: Aoi, lat: number, lon: number): boolean {
  return lat >= aoi.minLat && lat <= aoi.maxLat && lon >= aoi.minLon && lon <= aoi.maxLon;
}

/**
 * Build flow-map lines from an aggregated extraction document. The server
 * already applied min_count and the either-endpoint bbox cut; here intra rows
 * are dropped and the AOI is refined to the direction's endpoint. Counts are
 * taken verbatim from the response; only widths are derived, for display.
 */
export function buildFlowMap(
  flows: Csv,
  direction: Direction,
  aoi: Aoi | null,
): FlowMapViewModel {
  const o = column(flows, "o_place");
  const d = column(flows, "d_place");
  const cnt = column(flows, "cnt").map(Number);
  const oLat = column(flows, "o_lat").map(Number);
  const oLon = column(flows, "o_lon").map(Number);
  const dLat = column(flows, "d_lat").map(Number);
  const dLon = column(flows, "d_lon").map(Number);

  let rows: Omit<FlowLine, "width">[] = [];
  for (let i = 0; i < o.length; i++) {
    if (o[i] === d[i]) {
      continue; // flow maps draw movement between places
    }
    if (aoi) {
      const destIn = inBox(aoi, dLat[i], dLon[i]);
      const origIn = inBox(aoi, oLat[i], oLon[i]);
      const keep =
        direction === "inflow" ? destIn : direction === "outflow" ? origIn : destIn || origIn;
      if (!keep) {
        continue;
      }
    }
    rows.push({ o: o[i], d: d[i], cnt: cnt[i], oLat: oLat[i], oLon: oLon[i], dLat: dLat[i], dLon: dLon[i] });
  }

  let notice: string | null = null;
  if (rows.length === 0) {
    notice = "no flows above the count threshold";
  } else if (rows.length > MAX_RENDERED_LINES) {
    rows = [...rows].sort((a, b) => b.cnt - a.cnt).slice(0, MAX_RENDERED_LINES);
    notice = `showing top ${MAX_RENDERED_LINES} flows by cnt`;
  }

  const counts = rows.map((r) => r.cnt);
  const lo = Math.min(...counts);
  const hi = Math.max(...counts);
  const lines = rows.map((r) => ({
    ...r,
    width: widthFor(r.cnt, lo, hi),
  }));
  return { lines, notice, total: lines.reduce((acc, l) => acc + l.cnt, 0) };
}

export function widthFor(cnt: number, lo: number, hi: number): number {
  if (!(hi > lo)) {
    return (MIN_WIDTH + MAX_WIDTH) / 2;
  }
  // sqrt ramp keeps small flows visible while staying monotone in cnt
  const t = Math.sqrt((cnt - lo) / (hi - lo));
  return MIN_WIDTH + t * (MAX_WIDTH - MIN_WIDTH);
}
