// Smoke corpus round trip: export five images here, load the result with the
// training-side Python reader, and compare ids, dims, token counts, boxes and
// pairings against the manifest we wrote.

import { execFileSync } from "node:child_process";
import * as path from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { HashTokenEncoder, tokenize } from "../src/encoders.js";
import { runExport } from "../src/export.js";
import { readManifest, tmpDir, writeCorpus } from "./helpers.js";

const PY_SRC = fileURLToPath(new URL("../../src", import.meta.url));

const READER_SCRIPT = `
import json, sys
from ckstn.data_io import read_features

fs = read_features(sys.argv[1])
print(json.dumps({
    "items": [
        {"id": it.id, "modality": it.modality, "tokens": it.tokens,
         "dim": it.dim, "has_boxes": it.boxes is not None,
         "box_ok": bool(it.boxes is None or
                        ((it.boxes[:, :4] >= 0).all() and (it.boxes[:, :4] <= 1).all()))}
        for it in fs.items
    ],
    "pairings": [list(p) for p in fs.pairings],
    "visual_dim": fs.dim("visual"),
    "textual_dim": fs.dim("textual"),
}))
`;

function readThroughPython(outDir: string): any {
  const stdout = execFileSync("python3", ["-c", READER_SCRIPT, outDir], {
    env: { ...process.env, PYTHONPATH: PY_SRC },
    encoding: "utf8",
  });
  return JSON.parse(stdout);
}

describe("round trip through the training-side reader", () => {
  it("five-image smoke corpus keeps ids, dims and pairings intact", () => {
    const dir = tmpDir("ck-roundtrip-");
    const { imagesDir, captionsTsv } = writeCorpus(dir, 5, [
      ["img0", "a boat on calm water"],
      ["img1", "three apples in a bowl"],
      ["img2", "the tower at night"],
      ["img2", "night view of the tower"],
      ["img3", "dogs racing on grass"],
      ["img4", "an empty street after rain"],
    ]);
    const out = path.join(dir, "out");
    const summary = runExport({ imagesDir, captionsTsv, outDir: out, maxRegions: 6 });
    expect(summary.visual).toBe(5);
    expect(summary.textual).toBe(6);

    const loaded = readThroughPython(out);
    const manifest = readManifest(out);

    expect(loaded.items).toHaveLength(manifest.items.length);
    expect(loaded.pairings).toEqual(manifest.pairings);
    expect(loaded.pairings).toHaveLength(6);
    expect(loaded.visual_dim).toBe(16);
    expect(loaded.textual_dim).toBe(16);

    const byId = new Map(loaded.items.map((e: any) => [e.id, e]));
    for (const e of manifest.items) {
      const got: any = byId.get(e.id);
      expect(got, `item ${e.id} present after reload`).toBeDefined();
      expect(got.modality).toBe(e.modality);
      expect(got.tokens).toBe(e.tokens);
      expect(got.dim).toBe(e.dim);
      expect(got.tokens).toBeLessThanOrEqual(6);
      expect(got.has_boxes).toBe(e.modality === "visual");
      expect(got.box_ok).toBe(true);
    }
  });

  it("feature values survive the float32 round trip exactly", () => {
    const dir = tmpDir("ck-roundtrip-");
    const { imagesDir, captionsTsv } = writeCorpus(dir, 1, [["img0", "just one pair"]]);
    const out = path.join(dir, "out");
    runExport({ imagesDir, captionsTsv, outDir: out, maxRegions: 3 });

    const script = `
import json, sys
from ckstn.data_io import read_features
fs = read_features(sys.argv[1])
it = fs.get("img0#0")
print(json.dumps(it.features.astype("float32").flatten().tolist()))
`;
    const stdout = execFileSync("python3", ["-c", script, out], {
      env: { ...process.env, PYTHONPATH: PY_SRC },
      encoding: "utf8",
    });
    const viaPython: number[] = JSON.parse(stdout);

    // regenerate the same vectors in-process
    const enc = new HashTokenEncoder();
    const local = tokenize("just one pair").flatMap((t) => Array.from(enc.encode(t)));
    expect(viaPython).toHaveLength(local.length);
    for (let i = 0; i < local.length; i++) {
      expect(viaPython[i]).toBeCloseTo(local[i], 7);
      expect(Math.abs(viaPython[i] - Math.fround(local[i]))).toBe(0);
    }
  });
});
