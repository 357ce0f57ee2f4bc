/**
 * Flow file I/O: 4-byte magic "PIEH", int32 width, int32 height, then
 * 2 * width * height float32 values interleaved (u, v), row-major.
 * All values little-endian.
 */

import { readFileSync, writeFileSync } from "node:fs";

export interface Flow {
  width: number;
  height: number;
  /** Horizontal displacement, row-major, length width * height. */
  u: Float32Array;
  /** Vertical displacement, row-major, length width * height. */
  v: Float32Array;
}

const MAGIC = "PIEH";

export function writeFlo(flow: Flow, path: string): void {
  const count = flow.width * flow.height;
  if (flow.u.length !== count || flow.v.length !== count) {
    throw new Error("flow component length does not match dimensions");
  }
  for (let i = 0; i < count; i++) {
    if (!Number.isFinite(flow.u[i]) || !Number.isFinite(flow.v[i])) {
      throw new Error("flow contains non-finite values");
    }
  }
  const buffer = Buffer.alloc(12 + 8 * count);
  buffer.write(MAGIC, 0, "latin1");
  buffer.writeInt32LE(flow.width, 4);
  buffer.writeInt32LE(flow.height, 8);
  for (let i = 0; i < count; i++) {
    buffer.writeFloatLE(flow.u[i], 12 + 8 * i);
    buffer.writeFloatLE(flow.v[i], 16 + 8 * i);
  }
  writeFileSync(path, buffer);
}

export function readFlo(path: string): Flow {
  const raw = readFileSync(path);
  if (raw.length < 12 || raw.toString("latin1", 0, 4) !== MAGIC) {
    throw new Error(`${path}: bad flow magic`);
  }
  const width = raw.readInt32LE(4);
  const height = raw.readInt32LE(8);
  if (width < 1 || height < 1) {
    throw new Error(`${path}: bad flow dimensions ${width}x${height}`);
  }
  const count = width * height;
  if (raw.length !== 12 + 8 * count) {
    throw new Error(`${path}: flow payload size mismatch`);
  }
  const u = new Float32Array(count);
  const v = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    u[i] = raw.readFloatLE(12 + 8 * i);
    v[i] = raw.readFloatLE(16 + 8 * i);
    if (!Number.isFinite(u[i]) || !Number.isFinite(v[i])) {
      throw new Error(`${path}: non-finite flow value`);
    }
  }
  return { width, height, u, v };
}
