// Inference: one fringe image in, metric height map + mask out, in the
// dataset pipeline's own formats. Per-image wall-clock time is returned and
// logged (real-time use cares about it).

import { mkdirSync } from 'node:fs';
import { join } from 'node:path';

import * as tf from '@tensorflow/tfjs';

import { readPfm, writePfm } from './pfm.js';
import { writeMaskPgm } from './pgm.js';
import { LoadedModel } from './weights.js';

export interface PredictResult {
  latencyMs: number;
}

export function predictToFiles(
  loaded: LoadedModel, inputPath: string, outDir: string,
): PredictResult {
  const { model, meta } = loaded;
  const input = readPfm(inputPath);
  if (input.width !== meta.width || input.height !== meta.height) {
    throw new Error(
      `input is ${input.width}x${input.height}, model expects ` +
      `${meta.width}x${meta.height}`,
    );
  }

  const { inputScale, zMin, zMax } = meta.normalization;
  const normalized = new Float32Array(input.data.length);
  for (let i = 0; i < normalized.length; i++) {
    normalized[i] = input.data[i] / inputScale;
  }

  const start = performance.now();
  const x = tf.tensor4d(normalized, [1, meta.height, meta.width, 1]);
  const pred = model.predict(x) as tf.Tensor;
  const raw = pred.dataSync() as Float32Array;
  const latencyMs = performance.now() - start;
  tf.dispose([x, pred]);

  const height = new Float32Array(raw.length);
  const span = zMax - zMin;
  for (let i = 0; i < raw.length; i++) height[i] = raw[i] * span + zMin;

  mkdirSync(outDir, { recursive: true });
  writePfm({ width: meta.width, height: meta.height, data: height },
           join(outDir, 'height.pfm'));
  writeMaskPgm(
    { width: meta.width, height: meta.height,
      valid: new Uint8Array(raw.length).fill(1) },
    join(outDir, 'mask.pgm'),
  );
  return { latencyMs };
}
