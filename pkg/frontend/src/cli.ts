#!/usr/bin/env node
// ckstn-export export --images DIR --captions TSV --out DIR --max-regions N
//
// Exit codes: 0 success, 1 usage, 2 export failed (including zero
// exportable items).

import { realpathSync } from "node:fs";
import { pathToFileURL } from "node:url";

import { ExportError, runExport } from "./export.js";

const USAGE =
  "usage: ckstn-export export --images DIR --captions TSV --out DIR --max-regions N";

export function runCli(argv: string[], log: (msg: string) => void = console.error): number {
  if (argv[0] !== "export") {
    log(USAGE);
    return 1;
  }
  const flags = new Map<string, string>();
  for (let i = 1; i < argv.length; i += 2) {
    const key = argv[i];
    const val = argv[i + 1];
    if (!key.startsWith("--") || val === undefined) {
      log(USAGE);
      return 1;
    }
    flags.set(key.slice(2), val);
  }
  const images = flags.get("images");
  const captions = flags.get("captions");
  const out = flags.get("out");
  const maxRegions = Number(flags.get("max-regions"));
  if (!images || !captions || !out || !Number.isInteger(maxRegions)) {
    log(USAGE);
    return 1;
  }
  try {
    const summary = runExport(
      { imagesDir: images, captionsTsv: captions, outDir: out, maxRegions },
      { log },
    );
    console.log(
      `exported ${summary.visual} visual + ${summary.textual} textual items, ` +
        `${summary.pairings} pairings (${summary.skipped.length} skipped) -> ${summary.outDir}`,
    );
    return 0;
  } catch (e) {
    if (e instanceof ExportError) {
      log(`export failed: ${e.message}`);
      return 2;
    }
    throw e;
  }
}

const isMain =
  process.argv[1] !== undefined &&
  import.meta.url === pathToFileURL(realpathSync(process.argv[1])).href;
if (isMain) {
  process.exit(runCli(process.argv.slice(2)));
}
