// Export pipeline: images folder + caption TSV -> CKFT1 corpus directory.
//
// The caption file has one `id<TAB>text` line per caption; `id` names an
// image file in the folder (with or without the .png suffix). Several
// captions may share an image. Textual items get a `#k` suffix because item
// ids are unique across modalities in the output format.

import * as fs from "node:fs";
import * as path from "node:path";
import { PNG } from "pngjs";

import { FeatureItem, writeFeatures } from "./ckft.js";
import {
  ColorMomentEncoder,
  HashTokenEncoder,
  RegionEncoder,
  TokenEncoder,
  tokenize,
} from "./encoders.js";
import { gridRegions, Rgba } from "./regions.js";

export class ExportError extends Error {}

export interface ExportJob {
  imagesDir: string;
  captionsTsv: string;
  outDir: string;
  maxRegions: number;
}

export interface ExportOptions {
  regionEncoder?: RegionEncoder;
  tokenEncoder?: TokenEncoder;
  log?: (msg: string) => void;
}

export interface ExportSummary {
  visual: number;
  textual: number;
  pairings: number;
  skipped: string[];
  outDir: string;
}

interface Caption {
  imageId: string;
  text: string;
}

export function parseCaptions(tsvPath: string): Caption[] {
  let raw: string;
  try {
    raw = fs.readFileSync(tsvPath, "utf8");
  } catch (e) {
    throw new ExportError(`cannot read captions file ${tsvPath}: ${e}`);
  }
  const out: Caption[] = [];
  const lines = raw.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i];
    if (line.trim() === "") continue;
    const tab = line.indexOf("\t");
    if (tab <= 0) throw new ExportError(`captions line ${i + 1}: expected id<TAB>text`);
    const imageId = line.slice(0, tab).trim();
    const text = line.slice(tab + 1).trim();
    if (tokenize(text).length === 0) {
      throw new ExportError(`captions line ${i + 1}: caption for ${imageId} has no tokens`);
    }
    out.push({ imageId, text });
  }
  return out;
}

function resolveImage(imagesDir: string, id: string): string {
  const direct = path.join(imagesDir, id);
  if (fs.existsSync(direct) && fs.statSync(direct).isFile()) return direct;
  return path.join(imagesDir, `${id}.png`);
}

function decodePng(file: string): Rgba {
  const raw = fs.readFileSync(file); // throws on missing file
  const png = PNG.sync.read(raw); // throws on malformed bytes
  return { width: png.width, height: png.height, data: png.data };
}

export function runExport(job: ExportJob, opts: ExportOptions = {}): ExportSummary {
  if (job.maxRegions < 1) throw new ExportError(`--max-regions must be >= 1, got ${job.maxRegions}`);
  const regionEnc = opts.regionEncoder ?? new ColorMomentEncoder();
  const tokenEnc = opts.tokenEncoder ?? new HashTokenEncoder();
  const log = opts.log ?? ((msg) => console.error(msg));

  const captions = parseCaptions(job.captionsTsv);
  if (captions.length === 0) throw new ExportError(`no captions in ${job.captionsTsv}`);

  // Decode each referenced image once; unreadable media is skipped, not fatal.
  const images = new Map<string, Rgba>();
  const skipped: string[] = [];
  for (const cap of captions) {
    if (images.has(cap.imageId) || skipped.includes(cap.imageId)) continue;
    const file = resolveImage(job.imagesDir, cap.imageId);
    try {
      images.set(cap.imageId, decodePng(file));
    } catch (e) {
      log(`skip ${cap.imageId}: ${e instanceof Error ? e.message : e}`);
      skipped.push(cap.imageId);
    }
  }

  const items: FeatureItem[] = [];
  for (const [id, img] of images) {
    const patches = gridRegions(img, job.maxRegions);
    items.push({
      id,
      modality: "visual",
      features: patches.map((p) => regionEncodeChecked(regionEnc, p)),
      boxes: patches.map((p) => Float32Array.from(p.box)),
    });
  }

  const pairings: [string, string][] = [];
  const perImage = new Map<string, number>();
  for (const cap of captions) {
    if (!images.has(cap.imageId)) continue;
    const k = perImage.get(cap.imageId) ?? 0;
    perImage.set(cap.imageId, k + 1);
    const textId = `${cap.imageId}#${k}`;
    const tokens = tokenize(cap.text).slice(0, job.maxRegions);
    items.push({
      id: textId,
      modality: "textual",
      features: tokens.map((t) => tokenEnc.encode(t)),
    });
    pairings.push([cap.imageId, textId]);
  }

  if (pairings.length === 0) {
    throw new ExportError("no exportable image/caption pairs (all media unreadable)");
  }
  writeFeatures({ items, pairings }, job.outDir);
  return {
    visual: images.size,
    textual: items.length - images.size,
    pairings: pairings.length,
    skipped,
    outDir: job.outDir,
  };
}

function regionEncodeChecked(enc: RegionEncoder, p: Parameters<RegionEncoder["encode"]>[0]): Float32Array {
  const v = enc.encode(p);
  if (v.length !== enc.dim) {
    throw new ExportError(`region encoder returned ${v.length} dims, claims ${enc.dim}`);
  }
  return v;
}
