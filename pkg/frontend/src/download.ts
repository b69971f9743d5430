import { downloadUrl, type FetchLike } from "./api.js";
import type { UiQueryState } from "./types.js";

export interface SavedFile {
  name: string;
  bytes: Uint8Array;
}

export function downloadFileName(state: UiQueryState): string {
  const tidy = (s: string) => s.replace(/\//g, "-");
  return `flows_${state.source}_${state.scale}_${tidy(state.begin)}_${tidy(state.end)}_${state.downloadType}.csv`;
}

/**
 * Fetch the extraction document for the current state and hand it over
 * unchanged: the saved file is the server's response byte for byte.
 */
export async function fetchDownload(
  fetchFn: FetchLike,
  base: string,
  state: UiQueryState,
): Promise<SavedFile> {
  const response = await fetchFn(downloadUrl(base, state));
  const text = await response.text();
  if (response.status !== 200) {
    throw new Error(text.trim());
  }
  return { name: downloadFileName(state), bytes: new TextEncoder().encode(text) };
}

/** Browser side: hand the bytes to the user agent as a file download. */
export function saveInBrowser(doc: Document, file: SavedFile): void {
  const blob = new Blob([file.bytes as BlobPart], { type: "text/csv;charset=utf-8" });
  const url = URL.createObjectURL(blob);
  const anchor = doc.createElement("a");
  anchor.href = url;
  anchor.download = file.name;
  doc.body.appendChild(anchor);
  anchor.click();
  anchor.remove();
  URL.revokeObjectURL(url);
}
