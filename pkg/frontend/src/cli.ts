// CLI: train / predict / evaluate against fringekit dataset directories.
//
//   train    --arch {fcn,aen,unet} --data DIR --out DIR
//            [--epochs N --batch N --loss {bce,mse} --seed S --lr R
//             --base-filters N --augment --dropout R --l2 R --snapshot-id ID]
//   predict  --model DIR (--input file.pfm --out DIR |
//                         --data DIR --split test --out DIR)
//   evaluate --pred DIR --data DIR [--out report.json]

import { writeFileSync } from 'node:fs';
import { join } from 'node:path';

import * as tf from '@tensorflow/tfjs';

import { loadManifest } from './dataset.js';
import { evaluatePredictions } from './evaluate.js';
import { Architecture } from './models.js';
import { predictToFiles } from './predict.js';
import { train } from './train.js';
import { loadModel } from './weights.js';

interface Flags {
  [key: string]: string | boolean;
}

function parseFlags(argv: string[]): Flags {
  const flags: Flags = {};
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith('--')) throw new Error(`unexpected argument ${arg}`);
    const key = arg.slice(2);
    if (i + 1 < argv.length && !argv[i + 1].startsWith('--')) {
      flags[key] = argv[++i];
    } else {
      flags[key] = true;
    }
  }
  return flags;
}

function requireString(flags: Flags, key: string): string {
  const value = flags[key];
  if (typeof value !== 'string') throw new Error(`missing required flag --${key}`);
  return value;
}

function numberOr(flags: Flags, key: string, fallback: number): number {
  const value = flags[key];
  if (value === undefined) return fallback;
  const parsed = Number(value);
  if (!Number.isFinite(parsed)) throw new Error(`flag --${key} must be a number`);
  return parsed;
}

async function cmdTrain(flags: Flags): Promise<void> {
  const arch = requireString(flags, 'arch') as Architecture;
  if (!['fcn', 'aen', 'unet'].includes(arch)) {
    throw new Error(`--arch must be fcn, aen, or unet, got ${arch}`);
  }
  const loss = (flags.loss as string) ?? 'mse';
  if (loss !== 'mse' && loss !== 'bce') throw new Error('--loss must be mse or bce');
  const dataDir = requireString(flags, 'data');
  const outDir = requireString(flags, 'out');
  const result = await train(arch, dataDir, outDir, {
    epochs: numberOr(flags, 'epochs', 300),
    batchSize: numberOr(flags, 'batch', 2),
    loss,
    seed: numberOr(flags, 'seed', 0),
    learningRate: numberOr(flags, 'lr', 1e-3),
    baseFilters: numberOr(flags, 'base-filters', 16),
    augment: flags.augment === true,
    dropout: numberOr(flags, 'dropout', 0),
    l2: numberOr(flags, 'l2', 0),
    snapshotId: typeof flags['snapshot-id'] === 'string'
      ? (flags['snapshot-id'] as string) : null,
  });
  const last = result.history[result.history.length - 1];
  console.log(
    `trained ${arch}: ${result.history.length} epochs, ` +
    `final train loss ${last.trainLoss.toExponential(3)}, ` +
    `best val loss ${result.bestValLoss.toExponential(3)} -> ${outDir}`,
  );
}

async function cmdPredict(flags: Flags): Promise<void> {
  const modelDir = requireString(flags, 'model');
  const outDir = requireString(flags, 'out');
  const loaded = loadModel(modelDir);
  if (typeof flags.input === 'string') {
    const { latencyMs } = predictToFiles(loaded, flags.input as string, outDir);
    console.log(`predicted ${flags.input} in ${latencyMs.toFixed(1)} ms -> ${outDir}`);
  } else if (typeof flags.data === 'string') {
    const split = (flags.split as string) ?? 'test';
    const manifest = loadManifest(flags.data as string);
    const ids = manifest.splits[split as 'train' | 'validation' | 'test'];
    if (!ids || ids.length === 0) throw new Error(`split ${split} is empty`);
    let total = 0;
    for (const id of ids) {
      const input = join(flags.data as string, 'samples', id, 'input.pfm');
      const { latencyMs } = predictToFiles(loaded, input, join(outDir, id));
      total += latencyMs;
    }
    console.log(
      `predicted ${ids.length} ${split} samples, ` +
      `mean latency ${(total / ids.length).toFixed(1)} ms/image -> ${outDir}`,
    );
  } else {
    throw new Error('predict needs --input FILE or --data DIR');
  }
  loaded.model.dispose();
}

function cmdEvaluate(flags: Flags): void {
  const predDir = requireString(flags, 'pred');
  const dataDir = requireString(flags, 'data');
  const scores = evaluatePredictions(predDir, dataDir);
  console.log(
    `MRE ${scores.mre.toExponential(3)}  RMSE ${scores.rmse_mm.toFixed(4)} mm  ` +
    `(${scores.valid_pixel_count} px, ${scores.per_sample.length} samples)`,
  );
  if (typeof flags.out === 'string') {
    writeFileSync(flags.out as string, JSON.stringify(scores, null, 2) + '\n');
    console.log(`report -> ${flags.out}`);
  }
}

export async function main(argv: string[]): Promise<number> {
  const [command, ...rest] = argv;
  try {
    await tf.setBackend('cpu');
    await tf.ready();
    const flags = parseFlags(rest);
    if (command === 'train') await cmdTrain(flags);
    else if (command === 'predict') await cmdPredict(flags);
    else if (command === 'evaluate') cmdEvaluate(flags);
    else {
      console.error('usage: cli.js {train|predict|evaluate} --help-free flags (see header)');
      return 2;
    }
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

const isMain = process.argv[1] && import.meta.url.endsWith(
  process.argv[1].split('/').pop() as string,
);
if (isMain) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
