import { existsSync, mkdtempSync, readFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import { beforeAll, describe, expect, it } from 'vitest';
import * as tf from '@tensorflow/tfjs';

import { predictToFiles } from '../src/predict.js';
import { PlateauScheduler, makeRng, maskedLoss, train } from '../src/train.js';
import { loadModel } from '../src/weights.js';
import { readPfm } from '../src/pfm.js';
import { makeDataset } from './helpers.js';

beforeAll(async () => {
  await tf.setBackend('cpu');
  await tf.ready();
});

const tmp = () => mkdtempSync(join(tmpdir(), 'fk-train-'));

describe('PlateauScheduler', () => {
  it('halves the rate after 20 stale epochs', () => {
    const sched = new PlateauScheduler(1e-3, 20, 0.5, 1e-6);
    sched.onEpochEnd(1.0); // sets the best
    let rate = sched.learningRate;
    for (let i = 0; i < 19; i++) rate = sched.onEpochEnd(1.0);
    expect(rate).toBe(1e-3);
    rate = sched.onEpochEnd(1.0); // 20th epoch without improvement
    expect(rate).toBe(5e-4);
  });

  it('improvement resets the window', () => {
    const sched = new PlateauScheduler(1e-3, 3, 0.5, 1e-6);
    sched.onEpochEnd(1.0);
    sched.onEpochEnd(1.0);
    sched.onEpochEnd(0.5); // improvement
    sched.onEpochEnd(0.6);
    sched.onEpochEnd(0.6);
    expect(sched.onEpochEnd(0.6)).toBe(5e-4); // 3 stale epochs after reset
  });

  it('respects the minimum rate', () => {
    const sched = new PlateauScheduler(2e-6, 1, 0.5, 1e-6);
    sched.onEpochEnd(1.0);
    expect(sched.onEpochEnd(1.0)).toBe(1e-6);
    expect(sched.onEpochEnd(1.0)).toBe(1e-6);
  });
});

describe('maskedLoss', () => {
  it('ignores target perturbations inside masked regions', () => {
    const pred = tf.randomUniform([1, 4, 4, 1], 0.1, 0.9, 'float32', 7);
    const target = tf.randomUniform([1, 4, 4, 1], 0.1, 0.9, 'float32', 8);
    const maskData = new Float32Array(16).fill(1);
    maskData[5] = 0;
    maskData[6] = 0;
    const mask = tf.tensor4d(maskData, [1, 4, 4, 1]);

    const targetData = target.dataSync().slice() as Float32Array;
    targetData[5] = 123.0;
    targetData[6] = -55.0;
    const perturbed = tf.tensor4d(targetData, [1, 4, 4, 1]);

    for (const kind of ['mse', 'bce'] as const) {
      const a = maskedLoss(pred, target, mask, kind).dataSync()[0];
      const b = maskedLoss(pred, perturbed, mask, kind).dataSync()[0];
      expect(a).toBe(b);
    }
    tf.dispose([pred, target, mask, perturbed]);
  });

  it('mse reduces to the mean over valid pixels', () => {
    const pred = tf.ones([1, 2, 2, 1]);
    const target = tf.zeros([1, 2, 2, 1]);
    const mask = tf.tensor4d(new Float32Array([1, 1, 0, 0]), [1, 2, 2, 1]);
    expect(maskedLoss(pred, target, mask, 'mse').dataSync()[0]).toBe(1.0);
    tf.dispose([pred, target, mask]);
  });
});

describe('makeRng', () => {
  it('is deterministic per seed', () => {
    const a = makeRng(42);
    const b = makeRng(42);
    for (let i = 0; i < 100; i++) expect(a()).toBe(b());
    expect(makeRng(1)()).not.toBe(makeRng(2)());
  });
});

describe('train', () => {
  it('loss decreases on a learnable toy dataset', async () => {
    const dir = tmp();
    const fixture = makeDataset(join(dir, 'ds'), { counts: [4, 2, 1] });
    const out = join(dir, 'run');
    const result = await train('aen', fixture.dir, out, {
      epochs: 4, batchSize: 2, baseFilters: 4, seed: 1, snapshotId: null,
    });
    expect(result.history).toHaveLength(4);
    expect(result.history[3].trainLoss).toBeLessThan(result.history[0].trainLoss);
    expect(existsSync(join(out, 'weights.bin'))).toBe(true);
    expect(existsSync(join(out, 'history.json'))).toBe(true);
  }, 120_000);

  it('fixed seed reproduces the loss history exactly', async () => {
    const dir = tmp();
    const fixture = makeDataset(join(dir, 'ds'), { counts: [2, 1, 1] });
    const h1 = (await train('aen', fixture.dir, join(dir, 'a'), {
      epochs: 2, baseFilters: 2, seed: 9, snapshotId: null,
    })).history;
    const h2 = (await train('aen', fixture.dir, join(dir, 'b'), {
      epochs: 2, baseFilters: 2, seed: 9, snapshotId: null,
    })).history;
    expect(h1).toEqual(h2);
  }, 120_000);

  it('bce stores the dataset height range as the denormalization scale', async () => {
    const dir = tmp();
    const fixture = makeDataset(join(dir, 'ds'), { counts: [2, 1, 1] });
    const out = join(dir, 'run');
    const result = await train('aen', fixture.dir, out, {
      epochs: 1, baseFilters: 2, seed: 0, loss: 'bce', snapshotId: null,
    });
    const meta = JSON.parse(readFileSync(join(out, 'meta.json'), 'utf8'));
    expect(meta.outputActivation).toBe('sigmoid');
    // scale equals the observed min..max height range of the train split
    let zMin = Infinity;
    let zMax = -Infinity;
    for (const id of fixture.ids.train) {
      const z = readPfm(join(fixture.dir, 'samples', id, 'height.pfm')).data;
      for (const v of z) {
        if (Number.isFinite(v)) {
          zMin = Math.min(zMin, v);
          zMax = Math.max(zMax, v);
        }
      }
    }
    expect(meta.normalization.zMin).toBeCloseTo(zMin, 6);
    expect(meta.normalization.zMax).toBeCloseTo(zMax, 6);
    expect(result.meta.loss).toBe('bce');
  }, 120_000);

  it('writes per-epoch snapshots of the selected test sample', async () => {
    const dir = tmp();
    const fixture = makeDataset(join(dir, 'ds'), { counts: [2, 1, 1] });
    const out = join(dir, 'run');
    await train('aen', fixture.dir, out, {
      epochs: 2, baseFilters: 2, seed: 0, snapshotId: fixture.ids.test[0],
    });
    expect(existsSync(join(out, 'snapshots', 'epoch_000.pfm'))).toBe(true);
    expect(existsSync(join(out, 'snapshots', 'epoch_001.pfm'))).toBe(true);
  }, 120_000);

  it('constant-height dataset converges to the constant', async () => {
    const dir = tmp();
    const fixture = makeDataset(join(dir, 'ds'), {
      counts: [3, 1, 1], constantHeight: 20.0, depthRange: [0, 50],
    });
    const out = join(dir, 'run');
    await train('aen', fixture.dir, out, {
      epochs: 8, baseFilters: 2, seed: 4, snapshotId: null,
    });
    const loaded = loadModel(out);
    const { latencyMs } = predictToFiles(
      loaded,
      join(fixture.dir, 'samples', fixture.ids.test[0], 'input.pfm'),
      join(dir, 'pred'),
    );
    expect(latencyMs).toBeGreaterThan(0);
    const pred = readPfm(join(dir, 'pred', 'height.pfm'));
    let sum = 0;
    for (const v of pred.data) sum += v;
    const mean = sum / pred.data.length;
    // within 5% of the 50 mm depth range of the dataset
    expect(Math.abs(mean - 20.0)).toBeLessThan(0.05 * 50.0);
    loaded.model.dispose();
  }, 120_000);

  it('prediction is deterministic for the same input', async () => {
    const dir = tmp();
    const fixture = makeDataset(join(dir, 'ds'), { counts: [2, 1, 1] });
    const out = join(dir, 'run');
    await train('aen', fixture.dir, out, {
      epochs: 1, baseFilters: 2, seed: 2, snapshotId: null,
    });
    const loaded = loadModel(out);
    const input = join(fixture.dir, 'samples', fixture.ids.test[0], 'input.pfm');
    predictToFiles(loaded, input, join(dir, 'p1'));
    predictToFiles(loaded, input, join(dir, 'p2'));
    const a = readFileSync(join(dir, 'p1', 'height.pfm'));
    const b = readFileSync(join(dir, 'p2', 'height.pfm'));
    expect(a.equals(b)).toBe(true);
    loaded.model.dispose();
  }, 120_000);
});
