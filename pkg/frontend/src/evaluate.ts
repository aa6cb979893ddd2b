// MRE / RMSE over jointly valid pixels, matching the data pipeline's eval
// command definition exactly: RMSE in mm, MRE = mean |error| / depth range.

import { existsSync, readdirSync } from 'node:fs';
import { join } from 'node:path';

import { loadManifest, loadSample } from './dataset.js';
import { readPfm } from './pfm.js';
import { readMaskPgm } from './pgm.js';

export interface SampleScore {
  id: string;
  mre: number;
  rmse_mm: number;
  valid_pixel_count: number;
}

export interface Scores {
  mre: number;
  rmse_mm: number;
  valid_pixel_count: number;
  per_sample: SampleScore[];
}

export function evaluatePredictions(predDir: string, datasetDir: string): Scores {
  const manifest = loadManifest(datasetDir);
  const known = new Set([
    ...manifest.splits.train, ...manifest.splits.validation, ...manifest.splits.test,
  ]);
  const ids = readdirSync(predDir, { withFileTypes: true })
    .filter((e: { isDirectory(): boolean }) => e.isDirectory())
    .map((e: { name: string }) => e.name)
    .sort();
  if (ids.length === 0) throw new Error(`no prediction directories under ${predDir}`);
  for (const id of ids) {
    if (!known.has(id)) throw new Error(`prediction ${id} not present in the dataset`);
  }

  let sqSum = 0;
  let absSum = 0;
  let count = 0;
  let zMin = Infinity;
  let zMax = -Infinity;
  const raw: { id: string; sq: number; abs: number; n: number }[] = [];

  for (const id of ids) {
    const truth = loadSample(datasetDir, id);
    const pred = readPfm(join(predDir, id, 'height.pfm'));
    if (pred.width !== truth.height.width || pred.height !== truth.height.height) {
      throw new Error(`prediction ${id}: dimensions do not match the dataset`);
    }
    const maskPath = join(predDir, id, 'mask.pgm');
    const predMask = existsSync(maskPath) ? readMaskPgm(maskPath).valid : null;

    let sq = 0;
    let abs = 0;
    let n = 0;
    for (let i = 0; i < pred.data.length; i++) {
      const p = pred.data[i];
      const t = truth.height.data[i];
      const valid = truth.mask.valid[i] && (predMask ? predMask[i] : 1)
        && Number.isFinite(p) && Number.isFinite(t);
      if (!valid) continue;
      const e = p - t;
      sq += e * e;
      abs += Math.abs(e);
      n++;
      if (t < zMin) zMin = t;
      if (t > zMax) zMax = t;
    }
    if (n === 0) throw new Error(`prediction ${id}: no jointly valid pixels`);
    raw.push({ id, sq, abs, n });
    sqSum += sq;
    absSum += abs;
    count += n;
  }

  const span = manifest.depthRange
    ? manifest.depthRange[1] - manifest.depthRange[0]
    : Math.max(zMax - zMin, 1e-12);
  return {
    mre: absSum / count / span,
    rmse_mm: Math.sqrt(sqSum / count),
    valid_pixel_count: count,
    per_sample: raw.map((r) => ({
      id: r.id,
      mre: r.abs / r.n / span,
      rmse_mm: Math.sqrt(r.sq / r.n),
      valid_pixel_count: r.n,
    })),
  };
}
