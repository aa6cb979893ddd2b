// Fixture builders: tiny datasets in the exact on-disk layout the data
// pipeline exports (manifest.json + samples/<id>/{input,height,mask}).

import { mkdirSync, writeFileSync } from 'node:fs';
import { join } from 'node:path';

import { readPfm, writePfm } from '../src/pfm.js';
import { writeMaskPgm } from '../src/pgm.js';

export interface FixtureOptions {
  width?: number;
  height?: number;
  counts?: [number, number, number];
  depthRange?: [number, number];
  constantHeight?: number | null;
  maskHole?: boolean;
}

export interface Fixture {
  dir: string;
  ids: { train: string[]; validation: string[]; test: string[] };
  width: number;
  height: number;
  depthRange: [number, number];
}

export function makeDataset(dir: string, options: FixtureOptions = {}): Fixture {
  const w = options.width ?? 32;
  const h = options.height ?? 32;
  const [nTrain, nVal, nTest] = options.counts ?? [4, 2, 2];
  const depthRange = options.depthRange ?? [0, 50];
  const ids = {
    train: [] as string[],
    validation: [] as string[],
    test: [] as string[],
  };

  mkdirSync(join(dir, 'samples'), { recursive: true });
  let index = 0;
  const emit = (split: keyof typeof ids, count: number) => {
    for (let k = 0; k < count; k++) {
      const id = String(index).padStart(5, '0');
      ids[split].push(id);
      writeSample(dir, id, w, h, index, depthRange, options);
      index++;
    }
  };
  emit('train', nTrain);
  emit('validation', nVal);
  emit('test', nTest);

  const manifest = {
    version: 1,
    splits: ids,
    image_size: { width: w, height: h },
    fringe_spec: {
      frequencies: [1, 4, 20, 100],
      steps: 4,
      i0: 100.0,
      depth_range: depthRange,
    },
    calibration_file: null,
    units: 'mm',
  };
  writeFileSync(join(dir, 'manifest.json'), JSON.stringify(manifest, null, 2) + '\n');
  return { dir, ids, width: w, height: h, depthRange };
}

function writeSample(
  dir: string, id: string, w: number, h: number, index: number,
  depthRange: [number, number], options: FixtureOptions,
): void {
  const n = w * h;
  const height = new Float32Array(n);
  const input = new Float32Array(n);
  const valid = new Uint8Array(n).fill(1);
  const [zLo, zHi] = depthRange;
  const amp = zLo + ((index % 5) + 1) / 6 * (zHi - zLo);
  const cu = w / 2 + ((index * 7) % 11) - 5;
  const cv = h / 2 + ((index * 3) % 7) - 3;
  const sigma = Math.max(w, h) / 5;

  for (let v = 0; v < h; v++) {
    for (let u = 0; u < w; u++) {
      const i = v * w + u;
      const r2 = (u - cu) ** 2 + (v - cv) ** 2;
      const z = options.constantHeight ?? amp * Math.exp(-0.5 * r2 / sigma ** 2);
      height[i] = z;
      // inputs encode height through a fringe-like cosine of the blob
      input[i] = 100 * (1 + Math.cos(0.35 * z + 0.2 * u)) + 5;
    }
  }
  if (options.maskHole) {
    for (let v = 2; v < Math.min(8, h); v++) {
      for (let u = 2; u < Math.min(8, w); u++) {
        valid[v * w + u] = 0;
        height[v * w + u] = NaN;
      }
    }
  }

  const sampleDir = join(dir, 'samples', id);
  mkdirSync(sampleDir, { recursive: true });
  writePfm({ width: w, height: h, data: input }, join(sampleDir, 'input.pfm'));
  writePfm({ width: w, height: h, data: height }, join(sampleDir, 'height.pfm'));
  writeMaskPgm({ width: w, height: h, valid }, join(sampleDir, 'mask.pgm'));
  writeFileSync(join(sampleDir, 'provenance.json'),
                JSON.stringify({ seed: index }) + '\n');
}

/** Copy dataset truths into a prediction directory, optionally biased. */
export function predictionsFromTruth(
  fixture: Fixture, outDir: string, ids: string[], bias = 0,
): void {
  for (const id of ids) {
    const truth = readPfm(join(fixture.dir, 'samples', id, 'height.pfm'));
    const data = new Float32Array(truth.data.length);
    for (let i = 0; i < data.length; i++) {
      // a network prediction is finite everywhere, holes in truth included
      const v = truth.data[i];
      data[i] = Number.isFinite(v) ? v + bias : 0;
    }
    const d = join(outDir, id);
    mkdirSync(d, { recursive: true });
    writePfm({ width: truth.width, height: truth.height, data },
             join(d, 'height.pfm'));
    writeMaskPgm(
      { width: truth.width, height: truth.height,
        valid: new Uint8Array(data.length).fill(1) },
      join(d, 'mask.pgm'),
    );
  }
}
