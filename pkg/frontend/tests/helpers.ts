import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { PNG } from "pngjs";

export function tmpDir(prefix: string): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), prefix));
}

export function makePng(
  width: number,
  height: number,
  paint: (x: number, y: number) => [number, number, number, number],
): Buffer {
  const png = new PNG({ width, height });
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const i = (y * width + x) * 4;
      const [r, g, b, a] = paint(x, y);
      png.data[i] = r;
      png.data[i + 1] = g;
      png.data[i + 2] = b;
      png.data[i + 3] = a;
    }
  }
  return PNG.sync.write(png);
}

// Writes n distinct gradient images (img0.png ... imgN-1.png) plus a captions
// TSV with one line per entry of `captions`.
export function writeCorpus(
  dir: string,
  n: number,
  captions: [string, string][],
): { imagesDir: string; captionsTsv: string } {
  const imagesDir = path.join(dir, "images");
  fs.mkdirSync(imagesDir, { recursive: true });
  for (let i = 0; i < n; i++) {
    const buf = makePng(24 + i, 18, (x, y) => [
      (x * 9 + i * 40) % 256,
      (y * 13 + i * 25) % 256,
      (x + y + i * 60) % 256,
      255,
    ]);
    fs.writeFileSync(path.join(imagesDir, `img${i}.png`), buf);
  }
  const captionsTsv = path.join(dir, "captions.tsv");
  fs.writeFileSync(captionsTsv, captions.map(([id, t]) => `${id}\t${t}`).join("\n") + "\n");
  return { imagesDir, captionsTsv };
}

export function readManifest(outDir: string): any {
  return JSON.parse(fs.readFileSync(path.join(outDir, "manifest.json"), "utf8"));
}
