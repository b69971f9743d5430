import type { FeatureCollection, GeoFeature } from "./types.js";

export interface Viewport {
  width: number;
  height: number;
  pad: number;
}

export interface Projection {
  x(lon: number): number;
  y(lat: number): number;
}

interface Bounds {
  minLon: number;
  minLat: number;
  maxLon: number;
  maxLat: number;
}

function featureRings(feature: GeoFeature): number[][][] {
  const geom = feature.geometry;
  if (geom.type === "Polygon") {
    return geom.coordinates as number[][][];
  }
  return (geom.coordinates as number[][][][]).flat();
}

export function collectionBounds(fc: FeatureCollection): Bounds {
  let minLon = Infinity;
  let minLat = Infinity;
  let maxLon = -Infinity;
  let maxLat = -Infinity;
  for (const feature of fc.features) {
    for (const ring of featureRings(feature)) {
      for (const [lon, lat] of ring) {
        minLon = Math.min(minLon, lon);
        minLat = Math.min(minLat, lat);
        maxLon = Math.max(maxLon, lon);
        maxLat = Math.max(maxLat, lat);
      }
    }
  }
  return { minLon, minLat, maxLon, maxLat };
}

/** Plate-carree projection fitted to the viewport, north up. */
export function fitProjection(fc: FeatureCollection, vp: Viewport): Projection {
  const b = collectionBounds(fc);
  const spanLon = Math.max(b.maxLon - b.minLon, 1e-9);
  const spanLat = Math.max(b.maxLat - b.minLat, 1e-9);
  const scale = Math.min(
    (vp.width - 2 * vp.pad) / spanLon,
    (vp.height - 2 * vp.pad) / spanLat,
  );
  return {
    x: (lon) => vp.pad + (lon - b.minLon) * scale,
    y: (lat) => vp.height - vp.pad - (lat - b.minLat) * scale,
  };
}

export function featurePath(feature: GeoFeature, proj: Projection): string {
  const parts: string[] = [];
  for (const ring of featureRings(feature)) {
    const coords = ring.map(([lon, lat]) => `${round2(proj.x(lon))},${round2(proj.y(lat))}`);
    parts.push(`M${coords.join("L")}Z`);
  }
  return parts.join("");
}

function round2(v: number): number {
  return Math.round(v * 100) / 100;
}
