// Grayscale PFM, the float raster format the dataset pipeline uses:
// "Pf\n<width> <height>\n-1.0\n" + width*height little-endian float32,
// rows stored bottom-to-top. Payload bytes are moved verbatim so round
// trips are bit-exact, NaN payloads included.

import { readFileSync, writeFileSync } from 'node:fs';

export interface FloatImage {
  width: number;
  height: number;
  /** row-major, top row first */
  data: Float32Array;
}

export function writePfm(img: FloatImage, path: string): void {
  const { width, height, data } = img;
  if (data.length !== width * height) {
    throw new Error(`pfm: data length ${data.length} != ${width}x${height}`);
  }
  const header = Buffer.from(`Pf\n${width} ${height}\n-1.0\n`, 'ascii');
  const src = Buffer.from(data.buffer, data.byteOffset, data.byteLength);
  const payload = Buffer.alloc(data.byteLength);
  const rowBytes = width * 4;
  for (let row = 0; row < height; row++) {
    // bottom-to-top
    src.copy(payload, (height - 1 - row) * rowBytes, row * rowBytes, (row + 1) * rowBytes);
  }
  writeFileSync(path, Buffer.concat([header, payload]));
}

export function readPfm(path: string): FloatImage {
  const raw = readFileSync(path);
  let pos = 0;
  const line = (): string => {
    const nl = raw.indexOf(0x0a, pos);
    if (nl < 0) throw new Error(`${path}: truncated PFM header`);
    const text = raw.subarray(pos, nl).toString('ascii');
    pos = nl + 1;
    return text;
  };
  const magic = line();
  if (magic === 'PF') throw new Error(`${path}: color PFM not supported`);
  if (magic !== 'Pf') throw new Error(`${path}: not a PFM file (magic ${magic})`);
  const dims = line().split(/\s+/).map(Number);
  if (dims.length !== 2 || !dims.every(Number.isInteger) || dims[0] < 1 || dims[1] < 1) {
    throw new Error(`${path}: malformed PFM dimensions`);
  }
  const [width, height] = dims;
  const scale = Number(line());
  if (!Number.isFinite(scale) || scale === 0) throw new Error(`${path}: bad PFM scale`);
  const littleEndian = scale < 0;
  const payload = raw.subarray(pos);
  if (payload.length < width * height * 4) {
    throw new Error(`${path}: truncated PFM payload`);
  }
  const rowBytes = width * 4;
  const out = Buffer.alloc(width * height * 4);
  for (let row = 0; row < height; row++) {
    payload.copy(out, row * rowBytes, (height - 1 - row) * rowBytes, (height - row) * rowBytes);
  }
  if (!littleEndian) out.swap32();
  const data = new Float32Array(out.buffer, out.byteOffset, width * height);
  return { width, height, data };
}
