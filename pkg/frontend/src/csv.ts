import type { Csv } from "./types.js";

/**
 * Parse the API's CSV responses. The service never quotes fields (place ids,
 * dates, and numbers only), so a straight split is exact.
 */
export function parseCsv(text: string): Csv {
  const lines = text.split("\n").filter((line) => line.length > 0);
  if (lines.length === 0) {
    return { header: [], rows: [] };
  }
  const [first, ...rest] = lines;
  return {
    header: first.split(","),
    rows: rest.map((line) => line.split(",")),
  };
}

export function column(csv: Csv, name: string): string[] {
  const idx = csv.header.indexOf(name);
  if (idx < 0) {
    throw new Error(`CSV has no column ${name}`);
  }
  return csv.rows.map((row) => row[idx]);
}

export function sumColumn(csv: Csv, name: string): number {
  return column(csv, name).reduce((acc, v) => acc + Number(v), 0);
}
