// Training loop: masked loss, plateau LR halving, best-validation weights,
// per-epoch loss history, and a per-epoch prediction snapshot of one
// pre-selected test sample.

import { mkdirSync, writeFileSync } from 'node:fs';
import { join } from 'node:path';

import * as tf from '@tensorflow/tfjs';

import { Manifest, Sample, loadManifest, loadSample, loadSplit } from './dataset.js';
import { Architecture, buildNetwork } from './models.js';
import { writePfm } from './pfm.js';
import { ModelMeta, saveModel } from './weights.js';

export type LossKind = 'bce' | 'mse';

export interface TrainOptions {
  epochs: number;
  batchSize: number;
  loss: LossKind;
  learningRate: number;
  plateauPatience: number;
  plateauFactor: number;
  minLearningRate: number;
  augment: boolean;
  dropout: number;
  l2: number;
  seed: number;
  baseFilters: number;
  /** test sample predicted and saved at the end of every epoch */
  snapshotId?: string | null;
}

export const DEFAULT_TRAIN: TrainOptions = {
  epochs: 300,
  batchSize: 2,
  loss: 'mse',
  learningRate: 1e-3,
  plateauPatience: 20,
  plateauFactor: 0.5,
  minLearningRate: 1e-6,
  augment: false,
  dropout: 0,
  l2: 0,
  seed: 0,
  baseFilters: 16,
  snapshotId: null,
};

export interface EpochRecord {
  epoch: number;
  trainLoss: number;
  valLoss: number;
  learningRate: number;
}

/** Halve the learning rate when validation loss stalls for `patience` epochs. */
export class PlateauScheduler {
  private best = Infinity;
  private stale = 0;

  constructor(
    public learningRate: number,
    private patience: number,
    private factor: number,
    private minRate: number,
  ) {}

  onEpochEnd(valLoss: number): number {
    if (valLoss < this.best) {
      this.best = valLoss;
      this.stale = 0;
    } else {
      this.stale++;
      if (this.stale >= this.patience && this.learningRate > this.minRate) {
        this.learningRate = Math.max(this.learningRate * this.factor, this.minRate);
        this.stale = 0;
      }
    }
    return this.learningRate;
  }
}

/** Per-pixel loss averaged over valid pixels only (shadows never train). */
export function maskedLoss(
  pred: tf.Tensor, target: tf.Tensor, mask: tf.Tensor, kind: LossKind,
): tf.Scalar {
  return tf.tidy(() => {
    let perPixel: tf.Tensor;
    if (kind === 'mse') {
      perPixel = tf.squaredDifference(pred, target);
    } else {
      const eps = 1e-7;
      const p = tf.clipByValue(pred, eps, 1 - eps);
      perPixel = tf.neg(
        tf.add(
          tf.mul(target, tf.log(p)),
          tf.mul(tf.sub(1, target), tf.log(tf.sub(1, p))),
        ),
      );
    }
    const masked = tf.mul(perPixel, mask);
    return tf.div(tf.sum(masked), tf.sum(mask).clipByValue(1, Infinity)) as tf.Scalar;
  });
}

// deterministic PRNG for shuffling/augmentation (mulberry32)
export function makeRng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

interface Prepared {
  x: Float32Array;
  y: Float32Array;
  m: Float32Array;
}

export interface Normalization {
  inputScale: number;
  zMin: number;
  zMax: number;
}

function computeNormalization(samples: Sample[]): Normalization {
  let inputMax = 0;
  let zMin = Infinity;
  let zMax = -Infinity;
  for (const s of samples) {
    for (let i = 0; i < s.input.data.length; i++) {
      const v = s.input.data[i];
      if (Number.isFinite(v) && v > inputMax) inputMax = v;
      if (s.mask.valid[i]) {
        const z = s.height.data[i];
        if (Number.isFinite(z)) {
          if (z < zMin) zMin = z;
          if (z > zMax) zMax = z;
        }
      }
    }
  }
  if (!(zMax > zMin)) zMax = zMin + 1; // constant-height datasets
  return { inputScale: inputMax > 0 ? inputMax : 1, zMin, zMax };
}

function prepare(sample: Sample, norm: Normalization): Prepared {
  const n = sample.input.data.length;
  const x = new Float32Array(n);
  const y = new Float32Array(n);
  const m = new Float32Array(n);
  const span = norm.zMax - norm.zMin;
  for (let i = 0; i < n; i++) {
    x[i] = sample.input.data[i] / norm.inputScale;
    const valid = sample.mask.valid[i] && Number.isFinite(sample.height.data[i]);
    m[i] = valid ? 1 : 0;
    y[i] = valid ? (sample.height.data[i] - norm.zMin) / span : 0;
  }
  return { x, y, m };
}

function augmented(p: Prepared, w: number, h: number, rng: () => number): Prepared {
  const flip = rng() < 0.5;
  const du = Math.floor(rng() * 9) - 4;
  const dv = Math.floor(rng() * 9) - 4;
  if (!flip && du === 0 && dv === 0) return p;
  const remap = (src: Float32Array): Float32Array => {
    const out = new Float32Array(src.length);
    for (let v = 0; v < h; v++) {
      const sv = v - dv;
      if (sv < 0 || sv >= h) continue;
      for (let u = 0; u < w; u++) {
        let su = u - du;
        if (flip) su = w - 1 - su;
        if (su < 0 || su >= w) continue;
        out[v * w + u] = src[sv * w + su];
      }
    }
    return out;
  };
  return { x: remap(p.x), y: remap(p.y), m: remap(p.m) };
}

function toTensors(batch: Prepared[], h: number, w: number) {
  const n = batch.length;
  const size = h * w;
  const xs = new Float32Array(n * size);
  const ys = new Float32Array(n * size);
  const ms = new Float32Array(n * size);
  batch.forEach((p, i) => {
    xs.set(p.x, i * size);
    ys.set(p.y, i * size);
    ms.set(p.m, i * size);
  });
  return {
    x: tf.tensor4d(xs, [n, h, w, 1]),
    y: tf.tensor4d(ys, [n, h, w, 1]),
    m: tf.tensor4d(ms, [n, h, w, 1]),
  };
}

function datasetLoss(
  model: tf.LayersModel, data: Prepared[], h: number, w: number,
  batchSize: number, kind: LossKind,
): number {
  let total = 0;
  let batches = 0;
  for (let i = 0; i < data.length; i += batchSize) {
    const { x, y, m } = toTensors(data.slice(i, i + batchSize), h, w);
    const loss = tf.tidy(() =>
      maskedLoss(model.predict(x) as tf.Tensor, y, m, kind).dataSync()[0],
    );
    tf.dispose([x, y, m]);
    total += loss;
    batches++;
  }
  return total / Math.max(batches, 1);
}

export interface TrainResult {
  history: EpochRecord[];
  bestValLoss: number;
  meta: ModelMeta;
}

export async function train(
  arch: Architecture,
  dataDir: string,
  outDir: string,
  options: Partial<TrainOptions> = {},
): Promise<TrainResult> {
  const opt: TrainOptions = { ...DEFAULT_TRAIN, ...options };
  await tf.ready();

  const manifest: Manifest = loadManifest(dataDir);
  const { width: w, height: h } = manifest.imageSize;
  const trainSamples = loadSplit(dataDir, manifest, 'train');
  const valSamples = loadSplit(dataDir, manifest, 'validation');
  if (trainSamples.length === 0 || valSamples.length === 0) {
    throw new Error('train and validation splits must both be non-empty');
  }

  const norm = computeNormalization(trainSamples);
  const trainData = trainSamples.map((s) => prepare(s, norm));
  const valData = valSamples.map((s) => prepare(s, norm));

  const snapshotId = opt.snapshotId ?? manifest.splits.test[0] ?? null;
  const snapshot = snapshotId ? prepare(loadSample(dataDir, snapshotId), norm) : null;

  const model = buildNetwork({
    architecture: arch,
    height: h,
    width: w,
    baseFilters: opt.baseFilters,
    seed: opt.seed,
    l2: opt.l2,
    dropout: opt.dropout,
    outputActivation: opt.loss === 'bce' ? 'sigmoid' : 'linear',
  });

  mkdirSync(join(outDir, 'snapshots'), { recursive: true });
  const scheduler = new PlateauScheduler(
    opt.learningRate, opt.plateauPatience, opt.plateauFactor, opt.minLearningRate,
  );
  let optimizer = tf.train.adam(scheduler.learningRate);
  const rng = makeRng(opt.seed + 0x9e37);

  const history: EpochRecord[] = [];
  let bestValLoss = Infinity;
  let bestWeights: tf.Tensor[] | null = null;

  for (let epoch = 0; epoch < opt.epochs; epoch++) {
    const order = [...trainData.keys()];
    for (let i = order.length - 1; i > 0; i--) {
      const j = Math.floor(rng() * (i + 1));
      [order[i], order[j]] = [order[j], order[i]];
    }

    let trainLoss = 0;
    let batches = 0;
    for (let i = 0; i < order.length; i += opt.batchSize) {
      const batch = order.slice(i, i + opt.batchSize).map((k) => {
        const p = trainData[k];
        return opt.augment ? augmented(p, w, h, rng) : p;
      });
      const { x, y, m } = toTensors(batch, h, w);
      const cost = optimizer.minimize(
        () => maskedLoss(model.apply(x, { training: true }) as tf.Tensor, y, m, opt.loss),
        true,
      ) as tf.Scalar;
      trainLoss += cost.dataSync()[0];
      tf.dispose([x, y, m, cost]);
      batches++;
    }
    trainLoss /= Math.max(batches, 1);

    const valLoss = datasetLoss(model, valData, h, w, opt.batchSize, opt.loss);
    const previousRate = scheduler.learningRate;
    const rate = scheduler.onEpochEnd(valLoss);
    if (rate !== previousRate) {
      optimizer.dispose();
      optimizer = tf.train.adam(rate);
    }

    if (valLoss < bestValLoss) {
      bestValLoss = valLoss;
      if (bestWeights) tf.dispose(bestWeights);
      bestWeights = model.getWeights().map((t) => t.clone());
    }

    if (snapshot) {
      const x = tf.tensor4d(snapshot.x, [1, h, w, 1]);
      const pred = model.predict(x) as tf.Tensor;
      const data = pred.dataSync() as Float32Array;
      const mm = new Float32Array(data.length);
      for (let i = 0; i < mm.length; i++) {
        mm[i] = data[i] * (norm.zMax - norm.zMin) + norm.zMin;
      }
      writePfm(
        { width: w, height: h, data: mm },
        join(outDir, 'snapshots', `epoch_${String(epoch).padStart(3, '0')}.pfm`),
      );
      tf.dispose([x, pred]);
    }

    history.push({ epoch, trainLoss, valLoss, learningRate: rate });
  }

  if (bestWeights) {
    model.setWeights(bestWeights);
    tf.dispose(bestWeights);
  }
  optimizer.dispose();

  const meta: ModelMeta = {
    architecture: arch,
    height: h,
    width: w,
    baseFilters: opt.baseFilters,
    outputActivation: opt.loss === 'bce' ? 'sigmoid' : 'linear',
    loss: opt.loss,
    seed: opt.seed,
    l2: opt.l2,
    dropout: opt.dropout,
    normalization: norm,
  };
  saveModel(model, meta, outDir);
  writeFileSync(join(outDir, 'history.json'), JSON.stringify(history, null, 2) + '\n');
  model.dispose();
  return { history, bestValLoss, meta };
}
