// Grid region proposals over a decoded RGBA image. Boxes use the corpus
// convention: [x1, y1, x2, y2, area], all normalized to [0, 1].

export interface Rgba {
  width: number;
  height: number;
  data: Uint8Array; // width * height * 4, row-major
}

export interface RegionPatch {
  width: number;
  height: number;
  rgba: Uint8Array;
  box: [number, number, number, number, number];
}

export function gridRegions(img: Rgba, maxRegions: number): RegionPatch[] {
  if (maxRegions < 1) throw new Error(`maxRegions must be >= 1, got ${maxRegions}`);
  const n = Math.min(maxRegions, img.width * img.height);
  const rows = Math.max(1, Math.floor(Math.sqrt(n)));
  const cols = Math.ceil(n / rows);
  const out: RegionPatch[] = [];
  for (let r = 0; r < rows && out.length < n; r++) {
    for (let c = 0; c < cols && out.length < n; c++) {
      const x1 = Math.floor((c * img.width) / cols);
      const x2 = Math.floor(((c + 1) * img.width) / cols);
      const y1 = Math.floor((r * img.height) / rows);
      const y2 = Math.floor(((r + 1) * img.height) / rows);
      if (x2 <= x1 || y2 <= y1) continue;
      out.push({
        width: x2 - x1,
        height: y2 - y1,
        rgba: cropRgba(img, x1, y1, x2, y2),
        box: [
          x1 / img.width,
          y1 / img.height,
          x2 / img.width,
          y2 / img.height,
          ((x2 - x1) * (y2 - y1)) / (img.width * img.height),
        ],
      });
    }
  }
  return out;
}

function cropRgba(img: Rgba, x1: number, y1: number, x2: number, y2: number): Uint8Array {
  const w = x2 - x1;
  const h = y2 - y1;
  const out = new Uint8Array(w * h * 4);
  for (let y = 0; y < h; y++) {
    const src = ((y1 + y) * img.width + x1) * 4;
    out.set(img.data.subarray(src, src + w * 4), y * w * 4);
  }
  return out;
}
