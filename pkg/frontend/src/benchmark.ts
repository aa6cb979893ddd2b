// Desk-scale learning benchmark: trains FCN / AEN / UNet over several seeds
// on one dataset, scores the test split, and reports per-architecture median
// RMSE, the resulting ordering, and inference latency. The reference
// protocol is 50 epochs on a 600/60/60 dataset at 128x128 over 3 seeds
// (hours of compute on a GPU backend; report-only on plain CPU) - the flags
// let you scale it down.
//
//   node dist/benchmark.js --data DIR --out DIR
//        [--epochs 50 --seeds 3 --base-filters 16 --batch 2 --archs unet,aen,fcn]

import { mkdirSync, writeFileSync } from 'node:fs';
import { join } from 'node:path';

import * as tf from '@tensorflow/tfjs';

import { loadManifest } from './dataset.js';
import { evaluatePredictions } from './evaluate.js';
import { Architecture } from './models.js';
import { predictToFiles } from './predict.js';
import { train } from './train.js';
import { loadModel } from './weights.js';

interface ArchResult {
  architecture: Architecture;
  perSeed: { seed: number; testRmse: number; meanLatencyMs: number }[];
  medianTestRmse: number;
}

function median(values: number[]): number {
  const sorted = [...values].sort((a, b) => a - b);
  const mid = Math.floor(sorted.length / 2);
  return sorted.length % 2 ? sorted[mid] : (sorted[mid - 1] + sorted[mid]) / 2;
}

function flagValue(argv: string[], name: string): string | undefined {
  const i = argv.indexOf(`--${name}`);
  return i >= 0 && i + 1 < argv.length ? argv[i + 1] : undefined;
}

async function run(): Promise<number> {
  const argv = process.argv.slice(2);
  const dataDir = flagValue(argv, 'data');
  const outDir = flagValue(argv, 'out') ?? 'benchmark_out';
  if (!dataDir) {
    console.error('usage: benchmark.js --data DIR [--out DIR --epochs N --seeds N ...]');
    return 2;
  }
  const epochs = Number(flagValue(argv, 'epochs') ?? 50);
  const seeds = Number(flagValue(argv, 'seeds') ?? 3);
  const baseFilters = Number(flagValue(argv, 'base-filters') ?? 16);
  const batch = Number(flagValue(argv, 'batch') ?? 2);
  const archs = (flagValue(argv, 'archs') ?? 'unet,aen,fcn')
    .split(',') as Architecture[];

  await tf.setBackend('cpu');
  await tf.ready();
  mkdirSync(outDir, { recursive: true });

  const manifest = loadManifest(dataDir);
  const depthSpan = manifest.depthRange
    ? manifest.depthRange[1] - manifest.depthRange[0]
    : NaN;

  const results: ArchResult[] = [];
  for (const arch of archs) {
    const perSeed: ArchResult['perSeed'] = [];
    for (let seed = 0; seed < seeds; seed++) {
      const runDir = join(outDir, `${arch}_seed${seed}`);
      const started = performance.now();
      await train(arch, dataDir, runDir, {
        epochs, batchSize: batch, baseFilters, seed, snapshotId: null,
      });
      const trainMinutes = (performance.now() - started) / 60000;

      const loaded = loadModel(runDir);
      const predDir = join(runDir, 'pred');
      let latency = 0;
      for (const id of manifest.splits.test) {
        const { latencyMs } = predictToFiles(
          loaded, join(dataDir, 'samples', id, 'input.pfm'), join(predDir, id),
        );
        latency += latencyMs;
      }
      loaded.model.dispose();
      const meanLatencyMs = latency / manifest.splits.test.length;
      const scores = evaluatePredictions(predDir, dataDir);
      perSeed.push({ seed, testRmse: scores.rmse_mm, meanLatencyMs });
      console.log(
        `${arch} seed ${seed}: test RMSE ${scores.rmse_mm.toFixed(4)} mm, ` +
        `latency ${meanLatencyMs.toFixed(1)} ms/image, ` +
        `training ${trainMinutes.toFixed(1)} min`,
      );
    }
    results.push({
      architecture: arch,
      perSeed,
      medianTestRmse: median(perSeed.map((r) => r.testRmse)),
    });
  }

  const ordering = [...results].sort((a, b) => a.medianTestRmse - b.medianTestRmse)
    .map((r) => r.architecture);
  console.log('\nmedian test RMSE per architecture:');
  for (const r of results) {
    const rel = depthSpan ? ` (${(100 * r.medianTestRmse / depthSpan).toFixed(2)}% of range)` : '';
    console.log(`  ${r.architecture}: ${r.medianTestRmse.toFixed(4)} mm${rel}`);
  }
  console.log(`ordering (best first): ${ordering.join(' <= ')}`);
  const expected: Architecture[] = ['unet', 'aen', 'fcn'];
  const matches = archs.length === 3
    && ordering.every((a, i) => a === expected[i]);
  if (archs.length === 3) {
    console.log(`reference ordering unet <= aen <= fcn: ${matches ? 'reproduced' : 'NOT reproduced'}`);
  }

  writeFileSync(join(outDir, 'summary.json'), JSON.stringify({
    dataset: dataDir, epochs, seeds, baseFilters, results, ordering,
  }, null, 2) + '\n');
  console.log(`summary -> ${join(outDir, 'summary.json')}`);
  return 0;
}

run().then((code) => {
  process.exitCode = code;
});
