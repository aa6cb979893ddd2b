// Weight persistence without a filesystem IO handler: architecture config in
// meta.json, all weight tensors concatenated as little-endian float32 in
// weights.bin, in model.getWeights() order.

import { readFileSync, writeFileSync, mkdirSync } from 'node:fs';
import { join } from 'node:path';

import * as tf from '@tensorflow/tfjs';

import { Architecture, buildNetwork } from './models.js';
import { Normalization } from './train.js';

export interface ModelMeta {
  architecture: Architecture;
  height: number;
  width: number;
  baseFilters: number;
  outputActivation: 'linear' | 'sigmoid';
  loss: 'bce' | 'mse';
  seed: number;
  l2: number;
  dropout: number;
  normalization: Normalization;
  weightShapes?: number[][];
}

export function saveModel(model: tf.LayersModel, meta: ModelMeta, dir: string): void {
  mkdirSync(dir, { recursive: true });
  const weights = model.getWeights();
  const shapes = weights.map((t) => t.shape.slice());
  const total = weights.reduce((acc, t) => acc + t.size, 0);
  const flat = new Float32Array(total);
  let offset = 0;
  for (const t of weights) {
    flat.set(t.dataSync() as Float32Array, offset);
    offset += t.size;
  }
  writeFileSync(join(dir, 'weights.bin'), Buffer.from(flat.buffer));
  writeFileSync(
    join(dir, 'meta.json'),
    JSON.stringify({ ...meta, weightShapes: shapes }, null, 2) + '\n',
  );
}

export interface LoadedModel {
  model: tf.LayersModel;
  meta: ModelMeta;
}

export function loadModel(dir: string): LoadedModel {
  const meta = JSON.parse(readFileSync(join(dir, 'meta.json'), 'utf8')) as ModelMeta;
  const model = buildNetwork({
    architecture: meta.architecture,
    height: meta.height,
    width: meta.width,
    baseFilters: meta.baseFilters,
    seed: meta.seed,
    l2: meta.l2,
    dropout: meta.dropout,
    outputActivation: meta.outputActivation,
  });
  const raw = readFileSync(join(dir, 'weights.bin'));
  const flat = new Float32Array(raw.buffer, raw.byteOffset, raw.byteLength / 4);
  const shapes = meta.weightShapes ?? [];
  const tensors: tf.Tensor[] = [];
  let offset = 0;
  for (const shape of shapes) {
    const size = shape.reduce((a, b) => a * b, 1);
    tensors.push(tf.tensor(flat.slice(offset, offset + size), shape));
    offset += size;
  }
  model.setWeights(tensors);
  tf.dispose(tensors);
  return { model, meta };
}
