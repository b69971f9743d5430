import type { ChoroplethViewModel } from "./choropleth.js";
import { SELECTED_STROKE } from "./choropleth.js";
import type { FlowMapViewModel } from "./flowmap.js";
import { fitProjection, featurePath, type Viewport } from "./geo.js";
import { polylinePoints, type SeriesViewModel } from "./series.js";
import type { FeatureCollection } from "./types.js";

const VP: Viewport = { width: 860, height: 480, pad: 16 };

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");
}

/** Choropleth SVG: one path per place, hover value in <title>. */
export function choroplethSvg(model: ChoroplethViewModel, boundaries: FeatureCollection): string {
  const proj = fitProjection(boundaries, VP);
  const byId = new Map(model.cells.map((c) => [c.placeId, c]));
  const paths = boundaries.features.map((feature) => {
    const cell = byId.get(feature.properties.id);
    if (!cell) {
      return "";
    }
    const stroke = cell.selected ? ` stroke="${SELECTED_STROKE}" stroke-width="2.5"` : ' stroke="#555" stroke-width="0.7"';
    return (
      `<path class="place" data-place="${esc(cell.placeId)}" data-value="${cell.value ?? ""}"` +
      ` d="${featurePath(feature, proj)}" fill="${cell.color}"${stroke}>` +
      `<title>${esc(cell.hover)}</title></path>`
    );
  });
  return `<svg viewBox="0 0 ${VP.width} ${VP.height}" xmlns="http://www.w3.org/2000/svg">${paths.join("")}</svg>`;
}

export function legendHtml(model: ChoroplethViewModel, colors: string[]): string {
  if (model.empty) {
    return `<div class="legend-row"><span class="legend-label">no data</span></div>`;
  }
  return model.legend
    .map(
      (label, i) =>
        `<div class="legend-row"><span class="swatch" style="background:${colors[i]}"></span>` +
        `<span class="legend-label">${esc(label)}</span></div>`,
    )
    .join("");
}

/** Flow-map SVG: boundaries underneath, one line per flow, width from cnt. */
export function flowMapSvg(model: FlowMapViewModel, boundaries: FeatureCollection): string {
  const proj = fitProjection(boundaries, VP);
  const bg = boundaries.features
    .map((f) => `<path d="${featurePath(f, proj)}" fill="#f4f2ec" stroke="#bbb" stroke-width="0.7"/>`)
    .join("");
  const lines = model.lines
    .map(
      (l) =>
        `<line class="flow" data-o="${esc(l.o)}" data-d="${esc(l.d)}" data-cnt="${l.cnt}"` +
        ` x1="${r2(proj.x(l.oLon))}" y1="${r2(proj.y(l.oLat))}"` +
        ` x2="${r2(proj.x(l.dLon))}" y2="${r2(proj.y(l.dLat))}"` +
        ` stroke="#d94801" stroke-opacity="0.65" stroke-width="${r2(l.width)}">` +
        `<title>${esc(l.o)} → ${esc(l.d)}: ${l.cnt}</title></line>`,
    )
    .join("");
  return `<svg viewBox="0 0 ${VP.width} ${VP.height}" xmlns="http://www.w3.org/2000/svg">${bg}${lines}</svg>`;
}

/** Daily-series SVG: one polyline per place with a sample-point per day. */
export function seriesSvg(model: SeriesViewModel): string {
  const w = 860;
  const h = 300;
  const lines = model.lines
    .map((line) => {
      const pts = polylinePoints(line, model.maxValue, w, h);
      const dots = line.points
        .map((p, i) => {
          const [x, y] = pts.split(" ")[i].split(",");
          return `<circle class="pt" data-place="${esc(line.place)}" data-date="${p.date}" data-value="${p.value}" cx="${x}" cy="${y}" r="2.5" fill="${line.color}"/>`;
        })
        .join("");
      return (
        `<g class="series" data-place="${esc(line.place)}" data-sum="${line.sum}">` +
        `<polyline points="${pts}" fill="none" stroke="${line.color}" stroke-width="1.8"/>${dots}` +
        `<text x="6" y="${16 + 18 * model.lines.indexOf(line)}" fill="${line.color}">${esc(line.place)}</text></g>`
      );
    })
    .join("");
  return `<svg viewBox="0 0 ${w} ${h}" xmlns="http://www.w3.org/2000/svg">${lines}</svg>`;
}

function r2(v: number): number {
  return Math.round(v * 100) / 100;
}
