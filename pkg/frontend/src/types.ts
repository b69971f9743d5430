/** Shared types for the flow explorer. */

export type SourceKey = "twitter" | "safegraph";

export type Direction = "inflow" | "outflow" | "in_and_out" | "intraflow";

export type ViewMode = "choropleth" | "flowmap" | "series" | "download";

export interface Aoi {
  minLon: number;
  minLat: number;
  maxLon: number;
  maxLat: number;
}

/** Full query state of the page; everything needed to reproduce a view. */
export interface UiQueryState {
  source: SourceKey;
  scale: string;
  begin: string; // MM/DD/YYYY, as the API expects
  end: string;
  view: ViewMode;
  direction: Direction;
  place: string | null;
  overlayPlace: string | null;
  aoi: Aoi | null;
  /** null means "use the default rule for this source/view" */
  minCount: number | null;
  downloadType: "aggregated" | "daily";
}

export interface CatalogEntry {
  source: SourceKey;
  scale: string;
  firstDate: string; // ISO
  lastDate: string;
}

export interface Csv {
  header: string[];
  rows: string[][];
}

export interface GeoFeature {
  type: "Feature";
  properties: { id: string; name?: string };
  geometry: {
    type: "Polygon" | "MultiPolygon";
    coordinates: number[][][] | number[][][][];
  };
}

export interface FeatureCollection {
  type: "FeatureCollection";
  features: GeoFeature[];
}
