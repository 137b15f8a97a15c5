// CKFT1 writer: manifest.json (sorted keys) next to features.bin, a raw
// little-endian float32 row-major blob. Matches the reader on the training
// side field for field.

import * as fs from "node:fs";
import * as path from "node:path";

export const FORMAT_VERSION = "CKFT1";

export interface FeatureItem {
  id: string;
  modality: "visual" | "textual";
  features: Float32Array[]; // tokens x dim
  boxes?: Float32Array[];   // tokens x 5, visual only
}

export interface FeatureSet {
  items: FeatureItem[];
  pairings: [string, string][];
}

export class FormatError extends Error {}

export function validateFeatureSet(fs_: FeatureSet): void {
  const byId = new Map<string, FeatureItem>();
  const dims = new Map<string, number>();
  for (const it of fs_.items) {
    if (byId.has(it.id)) throw new FormatError(`duplicate item id ${it.id}`);
    byId.set(it.id, it);
    if (it.modality !== "visual" && it.modality !== "textual") {
      throw new FormatError(`unknown modality ${it.modality}`);
    }
    if (it.features.length === 0) throw new FormatError(`item ${it.id} has no rows`);
    const dim = it.features[0].length;
    for (const row of it.features) {
      if (row.length !== dim) throw new FormatError(`item ${it.id} has ragged rows`);
    }
    const seen = dims.get(it.modality);
    if (seen !== undefined && seen !== dim) {
      throw new FormatError(`${it.modality} dims differ: ${seen} vs ${dim}`);
    }
    dims.set(it.modality, dim);
    if (it.boxes) {
      if (it.boxes.length !== it.features.length) {
        throw new FormatError(`item ${it.id}: ${it.boxes.length} boxes vs ${it.features.length} rows`);
      }
      for (const b of it.boxes) {
        if (b.length !== 5) throw new FormatError(`item ${it.id}: box rows must have 5 entries`);
      }
    }
  }
  for (const [vid, tid] of fs_.pairings) {
    for (const [ident, want] of [[vid, "visual"], [tid, "textual"]] as const) {
      const got = byId.get(ident);
      if (!got) throw new FormatError(`pairing references unknown id ${ident}`);
      if (got.modality !== want) throw new FormatError(`pairing id ${ident} is not ${want}`);
    }
  }
}

function packRows(rows: Float32Array[]): Buffer {
  const cols = rows[0].length;
  const buf = Buffer.alloc(rows.length * cols * 4);
  const view = new DataView(buf.buffer, buf.byteOffset, buf.byteLength);
  let k = 0;
  for (const row of rows) {
    for (let j = 0; j < cols; j++) {
      view.setFloat32(k, row[j], true);
      k += 4;
    }
  }
  return buf;
}

// JSON.stringify with recursively sorted object keys so re-exports of the
// same corpus are byte-identical.
export function canonicalJson(value: unknown): string {
  const sort = (v: unknown): unknown => {
    if (Array.isArray(v)) return v.map(sort);
    if (v !== null && typeof v === "object") {
      const out: Record<string, unknown> = {};
      for (const key of Object.keys(v as object).sort()) {
        out[key] = sort((v as Record<string, unknown>)[key]);
      }
      return out;
    }
    return v;
  };
  return JSON.stringify(sort(value), null, 2) + "\n";
}

export function writeFeatures(fs_: FeatureSet, outDir: string): void {
  validateFeatureSet(fs_);
  const entries: Record<string, unknown>[] = [];
  const blobs: Buffer[] = [];
  let offset = 0;
  const push = (rows: Float32Array[]): number => {
    const raw = packRows(rows);
    blobs.push(raw);
    const start = offset;
    offset += raw.length;
    return start;
  };
  for (const it of fs_.items) {
    const entry: Record<string, unknown> = {
      id: it.id,
      modality: it.modality,
      tokens: it.features.length,
      dim: it.features[0].length,
      offset: push(it.features),
    };
    if (it.boxes) entry.box_offset = push(it.boxes);
    entries.push(entry);
  }
  const manifest = {
    format: FORMAT_VERSION,
    endianness: "little",
    dtype: "f4",
    items: entries,
    pairings: fs_.pairings.map((p) => [p[0], p[1]]),
    blob_bytes: offset,
  };
  fs.mkdirSync(outDir, { recursive: true });
  fs.writeFileSync(path.join(outDir, "manifest.json"), canonicalJson(manifest));
  fs.writeFileSync(path.join(outDir, "features.bin"), Buffer.concat(blobs));
}
