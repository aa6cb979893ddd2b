// Reading fringekit dataset directories: manifest + per-sample rasters.
// The manifest is the sole contract with the data-generation side.

import { existsSync, readFileSync } from 'node:fs';
import { join } from 'node:path';

import { FloatImage, readPfm } from './pfm.js';
import { MaskImage, readMaskPgm } from './pgm.js';

export type SplitName = 'train' | 'validation' | 'test';

export interface Manifest {
  version: number;
  splits: Record<SplitName, string[]>;
  imageSize: { width: number; height: number };
  fringeSpec: Record<string, unknown>;
  depthRange: [number, number] | null;
  units: string;
}

export interface Sample {
  id: string;
  input: FloatImage;
  height: FloatImage;
  mask: MaskImage;
}

export function loadManifest(dir: string): Manifest {
  const path = join(dir, 'manifest.json');
  if (!existsSync(path)) throw new Error(`no manifest.json under ${dir}`);
  const doc = JSON.parse(readFileSync(path, 'utf8'));
  const fringeSpec = doc.fringe_spec ?? {};
  const range = fringeSpec.depth_range;
  return {
    version: doc.version,
    splits: {
      train: doc.splits?.train ?? [],
      validation: doc.splits?.validation ?? [],
      test: doc.splits?.test ?? [],
    },
    imageSize: { width: doc.image_size.width, height: doc.image_size.height },
    fringeSpec,
    depthRange: Array.isArray(range) && range.length === 2
      ? [Number(range[0]), Number(range[1])]
      : null,
    units: doc.units ?? 'mm',
  };
}

export function loadSample(dir: string, id: string): Sample {
  const sampleDir = join(dir, 'samples', id);
  const input = readPfm(join(sampleDir, 'input.pfm'));
  const height = readPfm(join(sampleDir, 'height.pfm'));
  const mask = readMaskPgm(join(sampleDir, 'mask.pgm'));
  if (input.width !== height.width || input.height !== height.height
      || mask.width !== input.width || mask.height !== input.height) {
    throw new Error(`sample ${id}: raster dimensions disagree`);
  }
  return { id, input, height, mask };
}

export function loadSplit(dir: string, manifest: Manifest, split: SplitName): Sample[] {
  return manifest.splits[split].map((id) => loadSample(dir, id));
}
