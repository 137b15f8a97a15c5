// Pluggable feature encoders. The on-disk format is the only contract with
// the training side, so any encoder pair works as long as each modality keeps
// a consistent dim. The defaults are cheap and fully deterministic.

import { fnv1a, mulberry32 } from "./prng.js";
import { RegionPatch } from "./regions.js";

export interface RegionEncoder {
  dim: number;
  encode(patch: RegionPatch): Float32Array;
}

export interface TokenEncoder {
  dim: number;
  encode(token: string): Float32Array;
}

// Summary statistics of a region: channel means/stds, luminance mean/std,
// aspect and relative area. Length 10.
function regionStats(p: RegionPatch): number[] {
  const n = p.width * p.height;
  const sums = [0, 0, 0];
  const sq = [0, 0, 0];
  let lum = 0;
  let lumSq = 0;
  for (let i = 0; i < n; i++) {
    const r = p.rgba[i * 4] / 255;
    const g = p.rgba[i * 4 + 1] / 255;
    const b = p.rgba[i * 4 + 2] / 255;
    sums[0] += r; sums[1] += g; sums[2] += b;
    sq[0] += r * r; sq[1] += g * g; sq[2] += b * b;
    const l = 0.299 * r + 0.587 * g + 0.114 * b;
    lum += l;
    lumSq += l * l;
  }
  const stat: number[] = [];
  for (let c = 0; c < 3; c++) {
    const mean = sums[c] / n;
    stat.push(mean);
    stat.push(Math.sqrt(Math.max(0, sq[c] / n - mean * mean)));
  }
  const lumMean = lum / n;
  stat.push(lumMean);
  stat.push(Math.sqrt(Math.max(0, lumSq / n - lumMean * lumMean)));
  stat.push(p.width / p.height);
  stat.push(p.box[4]);
  return stat;
}

// Color-moment encoder: fixed seeded projection of the 10 region statistics,
// tanh-squashed so magnitudes stay O(1) regardless of image content.
export class ColorMomentEncoder implements RegionEncoder {
  readonly dim: number;
  private w: number[][];
  private b: number[];

  constructor(dim = 16, seed = 0x434b4654) {
    this.dim = dim;
    const rng = mulberry32(seed);
    this.w = [];
    this.b = [];
    for (let i = 0; i < dim; i++) {
      const row: number[] = [];
      for (let j = 0; j < 10; j++) row.push(2 * rng() - 1);
      this.w.push(row);
      this.b.push(2 * rng() - 1);
    }
  }

  encode(patch: RegionPatch): Float32Array {
    const s = regionStats(patch);
    const out = new Float32Array(this.dim);
    for (let i = 0; i < this.dim; i++) {
      let acc = this.b[i];
      for (let j = 0; j < s.length; j++) acc += this.w[i][j] * s[j];
      out[i] = Math.tanh(acc);
    }
    return out;
  }
}

// Hash encoder: the token string seeds a PRNG that draws a unit vector, so
// equal tokens map to equal vectors and distinct tokens are near-orthogonal
// in expectation.
export class HashTokenEncoder implements TokenEncoder {
  readonly dim: number;

  constructor(dim = 16) {
    this.dim = dim;
  }

  encode(token: string): Float32Array {
    const rng = mulberry32(fnv1a(token));
    const out = new Float32Array(this.dim);
    let norm = 0;
    for (let i = 0; i < this.dim; i++) {
      out[i] = 2 * rng() - 1;
      norm += out[i] * out[i];
    }
    norm = Math.sqrt(norm) || 1;
    for (let i = 0; i < this.dim; i++) out[i] /= norm;
    return out;
  }
}

export function tokenize(text: string): string[] {
  return text
    .toLowerCase()
    .split(/[^a-z0-9]+/)
    .filter((t) => t.length > 0);
}
