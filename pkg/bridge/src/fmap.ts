/**
 * Feature-volume container: magic "FMAP", uint32 version (=1), uint32 N, H,
 * W, C, uint8 normalized flag, then N*H*W*C float32 values in frame-major,
 * row-major, channel-last order.  All values little-endian.
 */

import { readFileSync, writeFileSync } from "node:fs";

export interface FeatureVolume {
  frames: number;
  height: number;
  width: number;
  channels: number;
  normalized: boolean;
  /** Channel-last, length frames * height * width * channels. */
  data: Float32Array;
}

const MAGIC = "FMAP";
const VERSION = 1;

export function writeFmap(volume: FeatureVolume, path: string): void {
  const { frames, height, width, channels } = volume;
  const count = frames * height * width * channels;
  if (frames < 2 || height < 1 || width < 1 || channels < 1) {
    throw new Error(`bad feature-volume dimensions ${frames}x${height}x${width}x${channels}`);
  }
  if (volume.data.length !== count) {
    throw new Error("feature data length does not match header");
  }
  for (let i = 0; i < count; i++) {
    if (!Number.isFinite(volume.data[i])) {
      throw new Error("feature volume contains non-finite values");
    }
  }
  const buffer = Buffer.alloc(25 + 4 * count);
  buffer.write(MAGIC, 0, "latin1");
  buffer.writeUInt32LE(VERSION, 4);
  buffer.writeUInt32LE(frames, 8);
  buffer.writeUInt32LE(height, 12);
  buffer.writeUInt32LE(width, 16);
  buffer.writeUInt32LE(channels, 20);
  buffer.writeUInt8(volume.normalized ? 1 : 0, 24);
  for (let i = 0; i < count; i++) {
    buffer.writeFloatLE(volume.data[i], 25 + 4 * i);
  }
  writeFileSync(path, buffer);
}

export function readFmap(path: string): FeatureVolume {
  const raw = readFileSync(path);
  if (raw.length < 25 || raw.toString("latin1", 0, 4) !== MAGIC) {
    throw new Error(`${path}: bad feature-volume magic`);
  }
  const version = raw.readUInt32LE(4);
  if (version !== VERSION) {
    throw new Error(`${path}: unsupported feature-volume version ${version}`);
  }
  const frames = raw.readUInt32LE(8);
  const height = raw.readUInt32LE(12);
  const width = raw.readUInt32LE(16);
  const channels = raw.readUInt32LE(20);
  const normalized = raw.readUInt8(24) !== 0;
  if (frames < 1 || height < 1 || width < 1 || channels < 1) {
    throw new Error(`${path}: zero dimension in header`);
  }
  const count = frames * height * width * channels;
  if (raw.length !== 25 + 4 * count) {
    throw new Error(`${path}: feature payload size mismatch`);
  }
  const data = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    data[i] = raw.readFloatLE(25 + 4 * i);
    if (!Number.isFinite(data[i])) {
      throw new Error(`${path}: non-finite feature value`);
    }
  }
  return { frames, height, width, channels, normalized, data };
}
