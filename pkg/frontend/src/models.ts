// The three encoder-decoder networks for single-shot height regression.
//
// All three map (batch, h, w, 1) -> (batch, h, w, 1) through 5 pooling
// stages (so h and w must be divisible by 32) and contain no fully
// connected layers. The AEN follows a fixed census: 22 standard 3x3
// convolutions + 5 max-pools + 5 transpose stages + one final 1x1
// convolution = 33 layers. Filter widths are configuration; the census and
// topology are the contract.

import * as tf from '@tensorflow/tfjs';

export type Architecture = 'fcn' | 'aen' | 'unet';

export interface NetworkConfig {
  architecture: Architecture;
  height: number;
  width: number;
  channels?: number;
  baseFilters?: number;
  seed?: number;
  l2?: number;
  dropout?: number;
  outputActivation?: 'linear' | 'sigmoid';
}

export const POOL_STAGES = 5;

type Regularizer = ReturnType<typeof tf.regularizers.l2>;

interface BuildContext {
  nextSeed: () => number;
  regularizer?: Regularizer;
}

function makeContext(config: NetworkConfig): BuildContext {
  let seed = (config.seed ?? 0) * 1000 + 1;
  return {
    nextSeed: () => seed++,
    regularizer: config.l2 && config.l2 > 0 ? tf.regularizers.l2({ l2: config.l2 }) : undefined,
  };
}

function conv(ctx: BuildContext, filters: number, x: tf.SymbolicTensor): tf.SymbolicTensor {
  return tf.layers
    .conv2d({
      filters,
      kernelSize: 3,
      padding: 'same',
      activation: 'relu',
      kernelInitializer: tf.initializers.heNormal({ seed: ctx.nextSeed() }),
      kernelRegularizer: ctx.regularizer,
    })
    .apply(x) as tf.SymbolicTensor;
}

function pool(x: tf.SymbolicTensor): tf.SymbolicTensor {
  return tf.layers.maxPooling2d({ poolSize: 2, strides: 2 }).apply(x) as tf.SymbolicTensor;
}

function up(ctx: BuildContext, filters: number, x: tf.SymbolicTensor): tf.SymbolicTensor {
  return tf.layers
    .conv2dTranspose({
      filters,
      kernelSize: 3,
      strides: 2,
      padding: 'same',
      activation: 'relu',
      kernelInitializer: tf.initializers.heNormal({ seed: ctx.nextSeed() }),
      kernelRegularizer: ctx.regularizer,
    })
    .apply(x) as tf.SymbolicTensor;
}

function head(ctx: BuildContext, config: NetworkConfig, x: tf.SymbolicTensor): tf.SymbolicTensor {
  return tf.layers
    .conv2d({
      filters: 1,
      kernelSize: 1,
      padding: 'same',
      activation: config.outputActivation ?? 'linear',
      kernelInitializer: tf.initializers.heNormal({ seed: ctx.nextSeed() }),
    })
    .apply(x) as tf.SymbolicTensor;
}

function stageFilters(base: number): number[] {
  // widths double per stage, capped at 8x to keep the bottleneck affordable
  return [base, base * 2, base * 4, base * 8, base * 8];
}

function checkDims(config: NetworkConfig): void {
  const div = 2 ** POOL_STAGES;
  if (config.height % div !== 0 || config.width % div !== 0) {
    throw new Error(
      `input ${config.width}x${config.height} not divisible by ${div} ` +
      `(${POOL_STAGES} pooling stages)`,
    );
  }
}

function buildAutoencoder(config: NetworkConfig, skips: boolean): tf.LayersModel {
  const ctx = makeContext(config);
  const filters = stageFilters(config.baseFilters ?? 16);
  const input = tf.input({ shape: [config.height, config.width, config.channels ?? 1] });

  // encoder: (conv conv pool) x5 -> 10 convs, 5 pools
  let x = input;
  const encoded: tf.SymbolicTensor[] = [];
  for (let s = 0; s < POOL_STAGES; s++) {
    x = conv(ctx, filters[s], x);
    x = conv(ctx, filters[s], x);
    encoded.push(x);
    x = pool(x);
  }

  // bottleneck: 2 convs
  x = conv(ctx, filters[POOL_STAGES - 1], x);
  if (config.dropout && config.dropout > 0) {
    x = tf.layers.dropout({ rate: config.dropout, seed: ctx.nextSeed() })
      .apply(x) as tf.SymbolicTensor;
  }
  x = conv(ctx, filters[POOL_STAGES - 1], x);

  // decoder: (transpose [concat] conv conv) x5 -> 5 transposes, 10 convs
  for (let s = POOL_STAGES - 1; s >= 0; s--) {
    x = up(ctx, filters[s], x);
    if (skips) {
      x = tf.layers.concatenate().apply([x, encoded[s]]) as tf.SymbolicTensor;
    }
    x = conv(ctx, filters[s], x);
    x = conv(ctx, filters[s], x);
  }

  const output = head(ctx, config, x);
  return tf.model({ inputs: input, outputs: output });
}

function buildFcn(config: NetworkConfig): tf.LayersModel {
  const ctx = makeContext(config);
  const filters = stageFilters(config.baseFilters ?? 16);
  const scoreChannels = Math.max(4, Math.floor((config.baseFilters ?? 16) / 2));
  const input = tf.input({ shape: [config.height, config.width, config.channels ?? 1] });

  // classification-style encoder; 1x1 score maps replace dense layers
  let x = input;
  const scores: tf.SymbolicTensor[] = [];
  for (let s = 0; s < POOL_STAGES; s++) {
    x = conv(ctx, filters[s], x);
    x = conv(ctx, filters[s], x);
    x = pool(x);
    scores.push(
      tf.layers
        .conv2d({
          filters: scoreChannels,
          kernelSize: 1,
          padding: 'same',
          kernelInitializer: tf.initializers.heNormal({ seed: ctx.nextSeed() }),
          kernelRegularizer: ctx.regularizer,
        })
        .apply(x) as tf.SymbolicTensor,
    );
  }

  // stage-wise upsampling of the coarsest map with additive skip fusion
  let y = scores[POOL_STAGES - 1];
  for (let s = POOL_STAGES - 2; s >= 0; s--) {
    y = up(ctx, scoreChannels, y);
    y = tf.layers.add().apply([y, scores[s]]) as tf.SymbolicTensor;
  }
  y = up(ctx, scoreChannels, y); // back to full resolution

  const output = head(ctx, config, y);
  return tf.model({ inputs: input, outputs: output });
}

export function buildNetwork(config: NetworkConfig): tf.LayersModel {
  checkDims(config);
  switch (config.architecture) {
    case 'aen':
      return buildAutoencoder(config, false);
    case 'unet':
      return buildAutoencoder(config, true);
    case 'fcn':
      return buildFcn(config);
    default:
      throw new Error(`unknown architecture ${config.architecture as string}`);
  }
}

export interface LayerCensus {
  standardConv: number;
  maxPool: number;
  transpose: number;
  oneByOneConv: number;
  dense: number;
  countedTotal: number;
}

export function layerCensus(model: tf.LayersModel): LayerCensus {
  const census: LayerCensus = {
    standardConv: 0,
    maxPool: 0,
    transpose: 0,
    oneByOneConv: 0,
    dense: 0,
    countedTotal: 0,
  };
  for (const layer of model.layers) {
    const cls = layer.getClassName();
    if (cls === 'Conv2D') {
      const size = (layer.getConfig().kernelSize as number[] | number);
      const k = Array.isArray(size) ? size[0] : size;
      if (k === 1) census.oneByOneConv++;
      else census.standardConv++;
    } else if (cls === 'MaxPooling2D') {
      census.maxPool++;
    } else if (cls === 'Conv2DTranspose') {
      census.transpose++;
    } else if (cls === 'Dense') {
      census.dense++;
    }
  }
  census.countedTotal =
    census.standardConv + census.maxPool + census.transpose + census.oneByOneConv;
  return census;
}
