// Binary PGM (P5, maxval 255) validity masks: 255 = valid, 0 = invalid.

import { readFileSync, writeFileSync } from 'node:fs';

export interface MaskImage {
  width: number;
  height: number;
  /** row-major; 1 = valid, 0 = invalid */
  valid: Uint8Array;
}

export function writeMaskPgm(mask: MaskImage, path: string): void {
  const { width, height, valid } = mask;
  if (valid.length !== width * height) {
    throw new Error(`pgm: mask length ${valid.length} != ${width}x${height}`);
  }
  const header = Buffer.from(`P5\n${width} ${height}\n255\n`, 'ascii');
  const payload = Buffer.alloc(valid.length);
  for (let i = 0; i < valid.length; i++) payload[i] = valid[i] ? 255 : 0;
  writeFileSync(path, Buffer.concat([header, payload]));
}

export function readMaskPgm(path: string): MaskImage {
  const raw = readFileSync(path);
  if (raw.subarray(0, 2).toString('ascii') !== 'P5') {
    throw new Error(`${path}: not a binary PGM`);
  }
  let pos = 2;
  const tokens: number[] = [];
  while (tokens.length < 3) {
    while (pos < raw.length && /\s/.test(String.fromCharCode(raw[pos]))) pos++;
    const start = pos;
    while (pos < raw.length && !/\s/.test(String.fromCharCode(raw[pos]))) pos++;
    if (start === pos) throw new Error(`${path}: truncated PGM header`);
    const value = Number(raw.subarray(start, pos).toString('ascii'));
    if (!Number.isInteger(value)) throw new Error(`${path}: malformed PGM header`);
    tokens.push(value);
  }
  pos++; // single whitespace after maxval
  const [width, height, maxval] = tokens;
  if (maxval !== 255) throw new Error(`${path}: mask PGM requires maxval 255`);
  const payload = raw.subarray(pos, pos + width * height);
  if (payload.length !== width * height) throw new Error(`${path}: truncated PGM payload`);
  const valid = new Uint8Array(width * height);
  for (let i = 0; i < valid.length; i++) {
    if (payload[i] !== 0 && payload[i] !== 255) {
      throw new Error(`${path}: mask bytes must be 0 or 255`);
    }
    valid[i] = payload[i] === 255 ? 1 : 0;
  }
  return { width, height, valid };
}
